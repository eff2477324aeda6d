# test_figures.py
# ----------------------------------------------------------------------
# Report figures: each renderer writes a valid, non-trivial PNG for a
# representative input (headless backend, no display).
# ----------------------------------------------------------------------
from treesim.emd import emd
from treesim.eventlog import log_from_sequences
from treesim.figures import figure_emd, figure_kpis, figure_tree, figure_variants
from treesim.params import mine_parameters
from treesim.ptree import parse_tree
from treesim.simengine import SimConfig, simulate

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

LOG = log_from_sequences(
    [("a", "b", "d"), ("a", "c", "d"), ("a", "b", "d"), ("a", "b", "c", "d")])


def _png_ok(path):
    data = path.read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 1000
    return True


def test_variant_figure(tmp_path):
    assert _png_ok(figure_variants(LOG, tmp_path / "variants.png"))


def test_tree_figure(tmp_path):
    tree = parse_tree(
        "->(a, X(b:0.6, c:0.4), *(d, e){max_redo=2, p_redo=0.3})"
        " {max_trace_length=9}")
    assert _png_ok(figure_tree(tree, tmp_path / "nested" / "tree.png"))


def test_kpi_figure(tmp_path):
    params, _ = mine_parameters(LOG)
    result = simulate(parse_tree("->(a, X(b:0.7, c:0.3), d)"), params,
                      SimConfig(num_cases=20, start_time=0, seed=3))
    assert _png_ok(figure_kpis(result.kpis, tmp_path / "kpis.png"))


def test_emd_figure(tmp_path):
    report = emd(LOG, log_from_sequences([("a", "b", "d"), ("a", "d")]))
    assert _png_ok(figure_emd(report, tmp_path / "emd.png"))
