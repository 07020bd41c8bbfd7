import numpy as np
import pytest

from adgcl_lab.ablation import (
    DEFAULT_SEEDS,
    DROP_GRID,
    RATIO_CLIP,
    ComparisonReport,
    MethodSummary,
    Protocol,
    RunScore,
    config_digest,
    parse_method,
    run_comparison,
)
from adgcl_lab.datasets import MotifSpec, RegressionSpec, generate_planted_motif, generate_regression_degree_target
from adgcl_lab.training import TrainConfig

CFG = TrainConfig(epochs=1, batch_size=8, hidden_dim=8, num_layers=2, lr_encoder=1e-2, lr_augmenter=1e-2)


@pytest.fixture(scope="module")
def data():
    return generate_planted_motif(30, 0, MotifSpec(min_nodes=6, max_nodes=9))


@pytest.fixture(scope="module")
def report(data):
    return run_comparison(data, ["ru", "adgcl-fix", "nadgcl-fix"], seeds=(0, 1, 2), config=CFG)


class TestParse:
    def test_names(self):
        assert parse_method("ru") == ("ru", None)
        assert parse_method("nadgcl:0.25") == ("nadgcl", 0.25)

    @pytest.mark.parametrize("bad", ["gan", "nadgcl:x", "nadgcl:1.0", "nadgcl:0"])
    def test_rejected(self, bad):
        with pytest.raises(ValueError):
            parse_method(bad)

    def test_defaults(self):
        assert len(DEFAULT_SEEDS) == 5
        assert DROP_GRID == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    def test_protocol(self):
        assert len(Protocol("kfold", folds=4).splits(20, 0)) == 4
        with pytest.raises(ValueError):
            Protocol("bootstrap").splits(20, 0)


class TestComparison:
    def test_shape(self, report):
        assert [s.method for s in report.summaries] == ["ru", "adgcl-fix", "nadgcl-fix"]
        for s in report.summaries:
            assert [r.seed for r in s.runs] == [0, 1, 2]
            assert s.metric_name == "accuracy"
            assert s.mean == pytest.approx(np.mean([r.test_metric for r in s.runs]))
        assert sorted(s.rank for s in report.summaries) == [1, 2, 3]

    def test_nadgcl_fix_uses_clipped_saddle_ratio(self, report):
        ad = report.summary("adgcl-fix").runs
        nad = report.summary("nadgcl-fix").runs
        for a, n in zip(ad, nad):
            r = float(np.clip(a.drop_ratio, *RATIO_CLIP))
            assert n.selected == f"ratio={r!r}"

    def test_metadata(self, report):
        meta = report.metadata
        assert meta["seeds"] == [0, 1, 2]
        assert meta["num_seeds"] == 3 and "10 runs" in meta["seed_note"]
        assert meta["config_digest"] == config_digest(CFG)
        digests = meta["split_digests"]
        assert set(digests) == {"0", "1", "2"}
        assert len({d[0] for d in digests.values()}) == 3

    def test_reproducible(self, data, report, tmp_path):
        again = run_comparison(data, ["ru", "adgcl-fix", "nadgcl-fix"], seeds=(0, 1, 2), config=CFG)
        report.write_csv(tmp_path / "a.csv")
        again.write_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_opt_variants_select_from_grids(self, data):
        rep = run_comparison(
            data, ["adgcl-opt", "nadgcl-opt"], seeds=(0,), config=CFG, lambda_grid=(0.1, 5.0), drop_grid=(0.2, 0.6)
        )
        assert rep.summary("adgcl-opt").runs[0].selected in ("lambda=0.1", "lambda=5.0")
        assert rep.summary("nadgcl-opt").runs[0].selected in ("ratio=0.2", "ratio=0.6")

    def test_opt_uses_validation_not_test(self, data):
        lams = (0.1, 5.0)
        rep = run_comparison(data, ["adgcl-opt"], seeds=(0,), config=CFG, lambda_grid=lams)
        singles = [
            run_comparison(data, ["adgcl-fix"], seeds=(0,), config=TrainConfig(**{**CFG.to_dict(), "lambda_reg": l}))
            for l in lams
        ]
        vals = [s.summary("adgcl-fix").runs[0].val_metric for s in singles]
        best = lams[int(np.argmax(vals))]
        assert rep.summary("adgcl-opt").runs[0].selected == f"lambda={best!r}"

    def test_regression_ranks_lower_first(self):
        data = generate_regression_degree_target(30, 0, RegressionSpec(min_nodes=6, max_nodes=9))
        rep = run_comparison(data, ["ru", "infomax"], seeds=(0,), config=CFG)
        first = rep.summary(rep.ranking()[0])
        assert first.metric_name == "rmse"
        assert first.mean == min(rep.means().values())

    def test_errors(self, data):
        with pytest.raises(ValueError):
            run_comparison(data, [], config=CFG)
        with pytest.raises(ValueError):
            run_comparison(data, ["ru"], seeds=(), config=CFG)
        with pytest.raises(ValueError):
            run_comparison(data, ["nadgcl:2"], config=CFG)


class TestReport:
    def test_text_table_and_summary_csv(self, tmp_path):
        runs = [RunScore("a", 0, 0.5, 0.6, "accuracy")]
        rep = ComparisonReport(
            [MethodSummary("a", "accuracy", 0.6, 0.0, runs, 2), MethodSummary("bb", "accuracy", 0.7, 0.1, runs, 1)]
        )
        lines = rep.text_table().splitlines()
        assert lines[1].startswith("bb") and lines[2].startswith("a ")
        assert rep.ranking() == ["bb", "a"]
        rep.write_summary_csv(tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines()[1] == "a,accuracy,0.6,0.0,1,2"
        with pytest.raises(KeyError):
            rep.summary("zz")
