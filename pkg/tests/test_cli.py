import shutil
import subprocess

import numpy as np
import pytest

from wcca.cli import (
    EXIT_CONSTANT,
    EXIT_DIMENSION,
    EXIT_FILE,
    EXIT_INVALID,
    EXIT_MODEL,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_SINGULAR,
    main,
)
from wcca.io import load_model, read_matrix, read_svg_values


def _csv(path, values, names=None, ids=None):
    values = np.asarray(values, float)
    names = names or [f"v{j}" for j in range(values.shape[1])]
    lines = [",".join((["id"] if ids else []) + names)]
    for i, row in enumerate(values):
        lines.append(",".join(([ids[i]] if ids else []) + [repr(float(v)) for v in row]))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture(scope="module")
def nutri_model(nutrimouse, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit") / "model.json"
    code = main([
        "fit", "--x", str(nutrimouse["gene_path"]), "--y", str(nutrimouse["lipid_path"]),
        "--out", str(out),
    ])
    assert code == EXIT_OK
    return out


def test_fit_nutrimouse(nutrimouse, tmp_path, capsys):
    code = main([
        "fit", "--x", str(nutrimouse["gene_path"]), "--y", str(nutrimouse["lipid_path"]),
        "--out", str(tmp_path / "m.json"),
    ])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    line = next(s for s in out.splitlines() if s.startswith("shrinkage intensity"))
    assert abs(float(line.split(":")[1]) - 0.16) <= 0.01
    assert "m: 21" in out
    values = [float(s.split()[1]) for s in out.split("lambdas:")[1].strip().splitlines()]
    assert len(values) == 21 and sum(v < 0 for v in values) == 16


def test_fit_self_without_shrinkage(rng, tmp_path, capsys):
    path = _csv(tmp_path / "f.csv", rng.standard_normal((30, 4)))
    assert main(["fit", "--x", path, "--y", path, "--shrinkage", "none"]) == EXIT_OK
    out = capsys.readouterr().out
    values = [float(s.split()[1]) for s in out.split("lambdas:")[1].strip().splitlines()]
    np.testing.assert_allclose(values, 1.0, atol=1e-6)
    assert "shrinkage intensity: none" in out


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,4,5\n")
    good = _csv(tmp_path / "g.csv", [[1, 2], [3, 4]])
    assert main(["fit", "--x", str(bad), "--y", good]) == EXIT_PARSE
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("kind", ["missing", "dimension", "constant", "singular", "nan"])
def test_error_exit_codes(kind, rng, tmp_path, capsys):
    x = rng.standard_normal((10, 3))
    y = rng.standard_normal((10, 2))
    xp = _csv(tmp_path / "x.csv", x)
    args = ["fit", "--x", xp, "--y", _csv(tmp_path / "y.csv", y)]
    expected = {
        "missing": EXIT_FILE, "dimension": EXIT_DIMENSION, "constant": EXIT_CONSTANT,
        "singular": EXIT_SINGULAR, "nan": EXIT_INVALID,
    }[kind]
    if kind == "missing":
        args[2] = str(tmp_path / "nope.csv")
    elif kind == "dimension":
        args[4] = _csv(tmp_path / "y.csv", y[:8])
    elif kind == "constant":
        y[:, 1] = 1.0
        args[4] = _csv(tmp_path / "y.csv", y)
    elif kind == "singular":
        args[4] = _csv(tmp_path / "y.csv", rng.standard_normal((10, 12)))
        args += ["--shrinkage", "none"]
    else:
        (tmp_path / "y.csv").write_text("a,b\n" + "1,2\n" * 4 + "NA,3\n" + "4,5\n" * 5)
    assert main(args) == expected
    err = capsys.readouterr().err
    assert err.startswith("error:")
    if kind == "constant":
        assert "y[1]" in err


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["fit", "--x", "a.csv"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["fit", "--x", "a", "--y", "b", "--shrinkage", "2"])
    assert info.value.code == 2


def test_scores_cross_correlation(rng, tmp_path):
    shared = rng.standard_normal((200, 2))
    x = np.hstack([shared, rng.standard_normal((200, 2))]) + rng.standard_normal((200, 4))
    y = shared @ [[1, 0.5], [0, -1]] + rng.standard_normal((200, 2))
    ids = [f"s{i}" for i in range(200)]
    xp, yp = _csv(tmp_path / "x.csv", x, ids=ids), _csv(tmp_path / "y.csv", y, ids=ids)
    model = tmp_path / "m.json"
    assert main(["fit", "--x", xp, "--y", yp, "--shrinkage", "none", "--out", str(model)]) == 0
    out = tmp_path / "s.csv"
    assert main(["scores", "--model", str(model), "--x", xp, "--y", yp, "--out", str(out)]) == 0
    s = read_matrix(out)
    assert s.column_names == ["cca_x_1", "cca_x_2", "cca_y_1", "cca_y_2"]
    assert s.row_ids == ids
    assert out.read_text().startswith("row_id,")
    lambdas = load_model(model).lambdas
    c = np.corrcoef(s.values, rowvar=False)
    np.testing.assert_allclose([c[0, 2], c[1, 3]], lambdas, atol=1e-10)


def test_scores_dimension_mismatch(nutri_model, nutrimouse, capsys):
    code = main([
        "scores", "--model", str(nutri_model),
        "--x", str(nutrimouse["lipid_path"]), "--y", str(nutrimouse["lipid_path"]),
    ])
    assert code == EXIT_DIMENSION


def test_scores_nutrimouse_genotype(nutri_model, nutrimouse, tmp_path):
    out = tmp_path / "s.csv"
    assert main([
        "scores", "--model", str(nutri_model), "--x", str(nutrimouse["gene_path"]),
        "--y", str(nutrimouse["lipid_path"]), "--out", str(out),
    ]) == EXIT_OK
    first = read_matrix(out).values[:, 0]
    wt = nutrimouse["genotype"] == "wt"
    assert abs(first[wt].mean() - first[~wt].mean()) > 0


def test_plot_lambdas(nutri_model, tmp_path):
    out = tmp_path / "l.svg"
    assert main(["plot-lambdas", "--model", str(nutri_model), "--out", str(out)]) == EXIT_OK
    values = read_svg_values(out.read_text())
    assert len(values) == 21 and sum(v < 0 for v in values) == 16
    assert 'class="zero-axis"' in out.read_text()


def test_plot_lambdas_bad_model(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("[]")
    assert main(["plot-lambdas", "--model", str(bad)]) == EXIT_MODEL
    assert main(["plot-lambdas", "--model", str(tmp_path / "none.json")]) == EXIT_MODEL


def test_simulate_default_grid(tmp_path):
    out = tmp_path / "sim.csv"
    svg = tmp_path / "sim.svg"
    assert main(["simulate", "--replicates", "10", "--out", str(out), "--svg", str(svg)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,lambda,proportion_correct,mean_abs_error,failures,replicates"
    assert len(lines) == 43
    cells = {(int(r.split(",")[0]), float(r.split(",")[1])) for r in lines[1:]}
    assert cells == {(n, lam) for n in (20, 30, 50, 100, 200, 500)
                     for lam in (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)}
    text = svg.read_text()
    assert text.count('class="series"') == 7
    assert len(read_svg_values(text, cls="point")) == 42


def test_simulate_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        args = ["simulate", "--replicates", "1", "--seed", "7", "--out", str(out)]
        assert main(args) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_jobs_from_environment(tmp_path, monkeypatch):
    base = ["simulate", "--replicates", "3", "--lambdas", "0.6", "--ns", "30,50"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--out", str(a)]) == EXIT_OK
    monkeypatch.setenv("WCCA_NUM_THREADS", "2")
    assert main(base + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_simulate_invalid_grid(capsys):
    assert main(["simulate", "--lambdas", "1.5", "--replicates", "1"]) == EXIT_INVALID
    assert main(["simulate", "--replicates", "0"]) == EXIT_INVALID


@pytest.mark.parametrize("method", ["ZCA-cor", "PCA-cor"])
def test_whiten_single_block(method, rng, tmp_path):
    x = rng.standard_normal((80, 4)) @ rng.standard_normal((4, 4)) + 3
    out = tmp_path / "w.csv"
    assert main(["whiten", "--x", _csv(tmp_path / "x.csv", x), "--method", method,
                 "--out", str(out)]) == EXIT_OK
    w = read_matrix(out, row_ids=False)
    prefix = method[:3].lower()
    assert w.column_names == [f"{prefix}_x_{i}" for i in range(1, 5)]
    np.testing.assert_allclose(np.cov(w.values, rowvar=False), np.eye(4), atol=1e-10)


def test_whiten_cca(rng, tmp_path):
    x = rng.standard_normal((60, 3))
    y = x[:, :2] + rng.standard_normal((60, 2))
    xp, yp = _csv(tmp_path / "x.csv", x), _csv(tmp_path / "y.csv", y)
    out = tmp_path / "w.csv"
    assert main(["whiten", "--x", xp, "--y", yp, "--method", "CCA", "--target", "y",
                 "--out", str(out)]) == EXIT_OK
    assert read_matrix(out, row_ids=False).column_names == ["cca_y_1", "cca_y_2"]
    assert main(["whiten", "--x", xp, "--method", "CCA"]) == EXIT_INVALID
    assert main(["whiten", "--x", xp, "--target", "y"]) == EXIT_INVALID


@pytest.mark.skipif(shutil.which("wcca") is None, reason="console script not installed")
def test_console_script(nutrimouse):
    res = subprocess.run(
        ["wcca", "fit", "--x", str(nutrimouse["gene_path"]), "--y", str(nutrimouse["lipid_path"])],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert "shrinkage intensity: 0.1599" in res.stdout
