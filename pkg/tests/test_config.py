import pytest

from sobolev_lab import (
    OUTPUT_DIR_ENV,
    DomainError,
    RunConfig,
    load_config,
    parse_config_text,
    with_overrides,
)


def test_default_config_valid():
    cfg = RunConfig().validate()
    assert cfg.resolution == 128 and cfg.seed == 42


@pytest.mark.parametrize("field,value,message", [
    ("p", 0.5, "p must lie in (1,n)"),
    ("p", 2.0, "p must lie in (1,n)"),
    ("resolution", 100, "power of two"),
    ("resolution", 32, "power of two"),
    ("samples", -1, "samples"),
    ("format", "xml", "format"),
    ("perturbation_kinds", ("Wave",), "unknown perturbation kind"),
    ("shrink_constants", 0.0, "shrink"),
])
def test_config_validation(field, value, message):
    with pytest.raises(DomainError, match=message.replace("(", r"\(").replace(")", r"\)")):
        RunConfig(**{field: value}).validate()


def test_config_text_round_trip(tmp_path):
    cfg = RunConfig(n=3, p=2.5, samples=7, eps_grid=(0.2, 0.05), perturbation_kinds=("GaussianBump",),
                    ratios=True, shrink_constants=4.0)
    path = tmp_path / "run.cfg"
    path.write_text("\n".join(cfg.to_lines()) + "\n")
    assert load_config(path) == cfg


def test_config_text_aliases_comments_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# a comment\nn = 3\np = 2.5\nperturbation-kinds = gaussian, tangent\n\n"
                    "ratios = yes\n")
    cfg = load_config(path, samples=5, p=None)
    assert cfg.p == 2.5 and cfg.samples == 5 and cfg.ratios
    assert cfg.perturbation_kinds == ("GaussianBump", "ManifoldTangent")
    assert with_overrides(cfg, seed=9).seed == 9


def test_config_text_errors():
    with pytest.raises(DomainError, match="unknown config key"):
        parse_config_text("colour = blue\n")
    with pytest.raises(DomainError, match="expected key = value"):
        parse_config_text("just words\n")
    with pytest.raises(DomainError, match="bad value"):
        parse_config_text("samples = many\n")


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert RunConfig(output_path="x.csv").resolved_output() == tmp_path / "x.csv"
    assert RunConfig(output_path="/abs/x.csv").resolved_output().as_posix() == "/abs/x.csv"
