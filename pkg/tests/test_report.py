from causalgen.report import plot_edge_frequencies, plot_eval, plot_mining_stats

PNG = b"\x89PNG"

STATS = {"per_pattern": {"because": 3, "due_to": 1}, "rejects": {"ambiguous": 1, "short": 0},
         "duplicates": 2, "EPC": 3, "CPE": 1}


def test_mining_figures(tmp_path):
    paths = plot_mining_stats(STATS, tmp_path / "out")
    assert [p.name for p in paths] == ["mining_patterns.png", "mining_rejects.png"]
    assert all(p.read_bytes().startswith(PNG) for p in paths)


def test_mining_figures_empty_stats(tmp_path):
    assert len(plot_mining_stats({}, tmp_path)) == 2


def test_edge_histogram(tmp_path):
    p = plot_edge_frequencies([6, 6, 7, 30, 900], tmp_path)
    assert p.read_bytes().startswith(PNG)
    assert plot_edge_frequencies([], tmp_path).exists()


def test_eval_figures(tmp_path):
    paths = plot_eval({"perplexity": 12.5, "word_accuracy": 0.3}, [0.1, 0.5, 0.33], tmp_path)
    assert [p.name for p in paths] == ["eval_metrics.png", "eval_div.png"]
    assert plot_eval({}, [], tmp_path) == []


def test_figures_reproducible(tmp_path):
    a = plot_mining_stats(STATS, tmp_path / "a")
    b = plot_mining_stats(STATS, tmp_path / "b")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]
