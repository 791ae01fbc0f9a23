import hashlib
import json

import numpy as np
import pytest

import fairshift as fs
from fairshift.cli import REPORT_SCHEMA, main
from fairshift.policy import expected_rates, policy_from_json
from fairshift.rates import conditional_cdf
from fairshift.synth import load_oracle_csv


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def loan_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("loansim")
    code = main(["simulate", "--scenario", "loan", "--n", "8000",
                 "--seed", "7", "--out-dir", str(out)])
    assert code == 0
    return out


class TestSimulate:
    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["simulate", "--scenario", "loan", "--n", "500",
                         "--seed", "3", "--out-dir", str(out)]) == 0
        assert sha(a / "loan.csv") == sha(b / "loan.csv")
        assert sha(a / "loan_oracle.csv") == sha(b / "loan_oracle.csv")

    def test_zero_rows_writes_header_only(self, tmp_path):
        assert main(["simulate", "--scenario", "loan", "--n", "0",
                     "--out-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "loan.csv").read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("x_")

    def test_quantile_scenario(self, loan_run, tmp_path):
        code = main(["simulate", "--scenario", "quantile",
                     "--data", str(loan_run / "loan.csv"),
                     "--feature", "0", "--q", "0.1", "--out-dir", str(tmp_path)])
        assert code == 0
        censored = fs.load_csv(tmp_path / "quantile_censored.csv")
        assert censored.included.sum() < censored.n

    def test_quantile_without_data_is_config_error(self, tmp_path):
        assert main(["simulate", "--scenario", "quantile",
                     "--out-dir", str(tmp_path)]) == 2

    def test_config_file_precedence(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"n": 100, "seed": 1}))
        out1 = tmp_path / "o1"
        assert main(["simulate", "--scenario", "loan", "--config", str(conf),
                     "--out-dir", str(out1)]) == 0
        assert len((out1 / "loan.csv").read_text().splitlines()) == 101
        out2 = tmp_path / "o2"
        assert main(["simulate", "--scenario", "loan", "--config", str(conf),
                     "--n", "50", "--out-dir", str(out2)]) == 0
        assert len((out2 / "loan.csv").read_text().splitlines()) == 51

    def test_unknown_config_key_rejected(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"bogus": 1}))
        assert main(["simulate", "--scenario", "loan", "--config", str(conf),
                     "--out-dir", str(tmp_path)]) == 2


class TestFitAndWeights:
    def test_fit_writes_model(self, loan_run, tmp_path):
        assert main(["fit", "--data", str(loan_run / "loan.csv"),
                     "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "model.json").read_text())
        assert set(doc) >= {"per_group", "intercepts", "coefficients",
                            "label_map", "ridge"}
        assert doc["metadata"]["converged"]

    def test_weights_propensity(self, loan_run, tmp_path):
        assert main(["weights", "--data", str(loan_run / "loan.csv"),
                     "--method", "propensity", "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "weights.json").read_text())
        assert doc["form"] == "inverse_propensity"
        rows = (tmp_path / "weights.csv").read_text().splitlines()
        assert rows[0] == "row,group,weight,clipped"
        assert len(rows) > 1

    def test_weights_density(self, loan_run, tmp_path):
        assert main(["weights", "--data", str(loan_run / "loan.csv"),
                     "--method", "density", "--bins", "6",
                     "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "weights.json").read_text())
        assert doc["form"] == "density_ratio"
        assert doc["alpha"] == 1.0
        assert all(0 < e["weight"] <= 10.0 for e in doc["table"])

    def test_degenerate_inclusion_exit_code(self, tmp_path):
        path = tmp_path / "flat.csv"
        path.write_text("x_f,a,y,z\n" + "\n".join(
            f"0.{i},{i % 2},{i % 2},1" for i in range(10)) + "\n")
        assert main(["weights", "--data", str(path),
                     "--method", "propensity", "--out-dir", str(tmp_path)]) == 4

    def test_missing_data_file_exit_code(self, tmp_path):
        assert main(["fit", "--data", str(tmp_path / "nope.csv"),
                     "--out-dir", str(tmp_path)]) == 3


class TestAdjust:
    def test_naive_eo_policy_and_rates(self, loan_run, tmp_path):
        code = main(["adjust", "--data", str(loan_run / "loan.csv"),
                     "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                     "--criterion", "eo", "--rho", "0.8",
                     "--out-dir", str(tmp_path)])
        assert code == 0
        policy = policy_from_json((tmp_path / "policy.json").read_text())
        sample = fs.load_csv(loan_run / "loan.csv")
        oracle = load_oracle_csv(loan_run / "loan_oracle.csv")
        rates = expected_rates(policy, fs.view(sample, "z=1"),
                               oracle.score_blind)
        assert abs(rates.tpr(1) - 0.8) <= 1e-12
        assert abs(rates.tpr(2) - 0.8) <= 1e-12
        lines = (tmp_path / "rates.csv").read_text().splitlines()
        assert lines[0] == "event,group,tpr,fpr,fnr,tnr"

    def test_reweighted_thresholds_lower_for_group1(self, loan_run, tmp_path):
        """At matched group-0 thresholds the corrected group-1 threshold sits
        strictly below the naive one, for every tested exchange rate."""
        sample = fs.load_csv(loan_run / "loan.csv")
        oracle = load_oracle_csv(loan_run / "loan_oracle.csv")
        train = fs.view(sample, "z=1")
        w = np.zeros(sample.n)
        w[train.indices] = 1.0 / oracle.propensity[train.indices]
        f0w = conditional_cdf(train, oracle.score_blind, 1, 1, weights=w)
        f1w = conditional_cdf(train, oracle.score_blind, 2, 1, weights=w)
        for rate in (1, 2, 5, 10, 25):
            out_n = tmp_path / f"naive{rate}"
            assert main(["adjust", "--data", str(loan_run / "loan.csv"),
                         "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                         "--criterion", "eo", "--fn-cost", "1",
                         "--fp-cost", str(rate), "--out-dir", str(out_n)]) == 0
            naive = policy_from_json((out_n / "policy.json").read_text())
            th0 = naive.rule_for(1).theta
            level = float(f0w.evaluate(th0))
            out_r = tmp_path / f"rw{rate}"
            assert main(["adjust", "--data", str(loan_run / "loan.csv"),
                         "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                         "--criterion", "eo", "--eval", "reweighted",
                         "--weights-from", "oracle-sidecar",
                         "--rho", repr(1.0 - level),
                         "--out-dir", str(out_r)]) == 0
            rw = policy_from_json((out_r / "policy.json").read_text())
            assert abs(rw.rule_for(1).theta - th0) <= 0.02
            assert rw.rule_for(2).theta < naive.rule_for(2).theta

    def test_equalized_odds_with_exchange_rate(self, loan_run, tmp_path):
        sample = fs.load_csv(loan_run / "loan.csv")
        oracle = load_oracle_csv(loan_run / "loan_oracle.csv")
        mixing_seen = False
        for rate in ("25", "1"):
            out = tmp_path / f"r{rate}"
            code = main(["adjust", "--data", str(loan_run / "loan.csv"),
                         "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                         "--criterion", "eodds", "--fn-fp-rate", rate,
                         "--out-dir", str(out)])
            assert code == 0
            policy = policy_from_json((out / "policy.json").read_text())
            rates = expected_rates(policy, fs.view(sample, "z=1"),
                                   oracle.score_blind)
            assert abs(rates.tpr(1) - rates.tpr(2)) <= 1e-9
            assert abs(rates.fpr(1) - rates.fpr(2)) <= 1e-9
            mixing_seen |= any(r.w > 0 for r in policy.rules.values())
        # an interior common optimum forces a two-point mixture somewhere
        assert mixing_seen

    def test_missing_weight_source_is_config_error(self, loan_run, tmp_path):
        assert main(["adjust", "--data", str(loan_run / "loan.csv"),
                     "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                     "--criterion", "eo", "--eval", "reweighted",
                     "--out-dir", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def run(loan_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("diag")
    pol_dir = tmp_path_factory.mktemp("pol")
    assert main(["adjust", "--data", str(loan_run / "loan.csv"),
                 "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                 "--criterion", "eo", "--rho", "0.8",
                 "--out-dir", str(pol_dir)]) == 0
    code = main(["diagnose", "--data", str(loan_run / "loan.csv"),
                 "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                 "--policy", str(pol_dir / "policy.json"),
                 "--weights-from", "oracle-sidecar",
                 "--out-dir", str(out)])
    assert code == 0
    return out, pol_dir


class TestDiagnose:
    def test_report_validates_against_published_schema(self, run):
        jsonschema = pytest.importorskip("jsonschema")
        out, _ = run
        report = json.loads((out / "report.json").read_text())
        jsonschema.validate(report, REPORT_SCHEMA)

    def test_report_contents(self, run):
        out, _ = run
        report = json.loads((out / "report.json").read_text())
        assert report["identity_check"]["residual"] <= 1e-12
        assert report["inequity"]["z=1"]["values"][0][1] == pytest.approx(0.0, abs=1e-12)
        assert abs(report["inequity"]["t=1"]["values"][0][1]) > 0.01
        kinds = {f["kind"] for f in report["dbd_findings"]}
        assert "weak_interval" in kinds
        assert report["censoring_null"]["max_gap"] > 0.01
        assert len(report["ratio_tests"]) == 2
        assert report["weight_summary"]["effective_sample_size"] > 0

    def test_plot_exports(self, run):
        out, _ = run
        curves = (out / "curves.csv").read_text().splitlines()
        kinds = {line.split(",")[0] for line in curves[1:]}
        assert kinds == {"cdf", "roc", "delta"}
        intervals = (out / "intervals.csv").read_text().splitlines()
        assert intervals[0] == \
            "advantaged,disadvantaged,theta_lo,theta_hi,tpr_lo,tpr_hi"
        assert len(intervals) >= 2

    def test_reports_reproducible_byte_for_byte(self, run, loan_run,
                                                tmp_path):
        out, pol_dir = run
        again = tmp_path / "again"
        assert main(["diagnose", "--data", str(loan_run / "loan.csv"),
                     "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                     "--policy", str(pol_dir / "policy.json"),
                     "--weights-from", "oracle-sidecar",
                     "--out-dir", str(again)]) == 0
        assert sha(again / "report.json") == sha(out / "report.json")
        assert sha(again / "curves.csv") == sha(out / "curves.csv")

    def test_aware_score_interval_brackets_midrange(self, run, loan_run,
                                                    tmp_path):
        """Diagnosing with the class-aware oracle score emits the interval
        whose training-TPR image covers the broad middle rates."""
        _, pol_dir = run
        out = tmp_path / "aware"
        assert main(["diagnose", "--data", str(loan_run / "loan.csv"),
                     "--oracle-sidecar", str(loan_run / "loan_oracle.csv"),
                     "--oracle-score", "aware",
                     "--policy", str(pol_dir / "policy.json"),
                     "--out-dir", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        ranges = [f["tpr_range"] for f in report["dbd_findings"]
                  if f["kind"] == "weak_interval" and f["advantaged"] == 1
                  and f["tpr_range"]]
        assert ranges
        lo, hi = ranges[0]
        assert lo <= 0.65 and hi >= 0.9  # sampling slack around [0.58, 0.95]

    def test_identical_populations_clean_report(self, tmp_path):
        """No censoring at all: every diagnostic comes back null."""
        sample, oracle = fs.generate_loan(fs.LoanScenarioSpec(n=2000, seed=5))
        uncensored = fs.PopulationSample.from_arrays(
            sample.covariates, sample.decode_groups(), sample.outcome,
            np.ones(sample.n), np.ones(sample.n),
            feature_names=sample.feature_names)
        data = tmp_path / "data.csv"
        fs.write_csv(uncensored, data)
        from fairshift.synth import write_oracle_csv
        write_oracle_csv(oracle, tmp_path / "oracle.csv")
        pol = tmp_path / "pol"
        assert main(["adjust", "--data", str(data),
                     "--oracle-sidecar", str(tmp_path / "oracle.csv"),
                     "--criterion", "eo", "--rho", "0.7",
                     "--out-dir", str(pol)]) == 0
        out = tmp_path / "diag"
        assert main(["diagnose", "--data", str(data),
                     "--oracle-sidecar", str(tmp_path / "oracle.csv"),
                     "--policy", str(pol / "policy.json"),
                     "--out-dir", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["censoring_null"]["max_gap"] <= 1e-12
        assert report["identity_check"]["residual"] <= 1e-12
        for event in ("z=1", "t=1"):
            values = np.array(report["inequity"][event]["values"])
            assert np.max(np.abs(values)) <= 1e-12
        assert all(f["kind"] == "none" for f in report["dbd_findings"])
