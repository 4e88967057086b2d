"""Pipeline orchestration: config rules, beta selection, artifacts, reports."""

import json

import numpy as np
import pytest

import bregdae.pipeline as pl
from bregdae.autoencoder import extract_features, load_ae_model
from bregdae.corpus import SparseDoc, build_corpus, labels_of, normalize_corpus, to_csr
from bregdae.optim import NumericalError
from bregdae.pipeline import (
    PipelineConfig,
    RunReport,
    StageError,
    compare,
    render_report_table,
    run,
    select_beta,
)
from bregdae.posterior import build_posterior, load_posterior
from bregdae.svm2 import error_rate, load_linear_model, train_svm2
from bregdae.synth import make_polarity_corpus


@pytest.fixture(scope="module")
def corpus():
    return normalize_corpus(
        make_polarity_corpus(n_train=60, n_test=40, n_features=60, seed=1)
    )


@pytest.fixture(scope="module")
def corpus_with_unlabeled():
    return normalize_corpus(
        make_polarity_corpus(n_train=40, n_test=20, n_unlabeled=30, n_features=60, seed=2)
    )


def small_config(**overrides):
    base = dict(
        method="sbdae",
        hidden_size=8,
        beta_grid=(1e5,),
        epochs=5,
        ae_epochs=3,
        finetune_epochs=2,
        batch_size=16,
        seed=0,
    )
    base.update(overrides)
    return PipelineConfig(**base)


class TestPipelineConfig:
    def test_unknown_method(self):
        with pytest.raises(ValueError):
            PipelineConfig(method="pca")

    def test_noise_rate_bounds(self):
        with pytest.raises(ValueError):
            PipelineConfig(noise_rate=1.0)

    def test_validation_fraction_bounds(self):
        with pytest.raises(ValueError):
            PipelineConfig(validation_fraction=0.0)

    def test_beta_grid_required_for_posterior_methods(self):
        with pytest.raises(ValueError):
            PipelineConfig(method="sbdae", beta_grid=())
        with pytest.raises(ValueError):
            PipelineConfig(method="sbdae+", beta_grid=(0.0,))
        PipelineConfig(method="dae", beta_grid=())  # no posterior, no complaint

    def test_hidden_size_defaults(self):
        assert PipelineConfig(method="dae").resolved_hidden_size() == 2000
        assert PipelineConfig(method="sbdae").resolved_hidden_size() == 200
        assert PipelineConfig(method="dae+").resolved_hidden_size() == 200
        assert PipelineConfig(method="dae", hidden_size=37).resolved_hidden_size() == 37


class TestRunReport:
    def test_error_range_validated(self):
        with pytest.raises(ValueError):
            RunReport("bow", None, -0.1, 0.5, 1.0, {})
        with pytest.raises(ValueError):
            RunReport("bow", None, 0.1, 1.5, 1.0, {})

    def test_timing_excluded_by_default(self):
        r = RunReport("bow", None, 0.1, 0.2, 3.5, {"seed": 0})
        rec = r.to_record()
        assert "seconds" not in rec
        assert r.to_record(include_timing=True)["seconds"] == 3.5
        assert rec["method"] == "bow" and rec["chosen_beta"] is None


class TestBowBaseline:
    def test_equals_directly_composed_stages(self, corpus):
        cfg = small_config(method="bow", beta_grid=())
        report = run(corpus, cfg)

        x_train = to_csr(corpus.train, len(corpus.vocab))
        x_test = to_csr(corpus.test, len(corpus.vocab))
        y_train, y_test = labels_of(corpus.train), labels_of(corpus.test)
        model = train_svm2(
            x_train, y_train, cfg.svm_lambda, cfg.sgd("svm", cfg.epochs, cfg.learning_rate)
        )
        assert report.train_error == error_rate(model, x_train, y_train)
        assert report.test_error == error_rate(model, x_test, y_test)
        assert report.chosen_beta is None and report.beta_errors == ()


class TestSelectBeta:
    def fake_runner(self, table, calls):
        def _fake(corpus, xt, yt, xv, yv, config, beta, artifacts=None):
            calls.append(beta)
            return 0.0, table[beta]

        return _fake

    def test_argmin_wins(self, corpus, monkeypatch):
        calls = []
        table = {1e4: 0.2, 1e5: 0.1, 1e6: 0.3}
        monkeypatch.setattr(pl, "_run_on_matrices", self.fake_runner(table, calls))
        cfg = small_config(beta_grid=(1e6, 1e4, 1e5))
        chosen, errors = select_beta(corpus, cfg)
        assert chosen == 1e5
        assert calls == [1e4, 1e5, 1e6]  # grid swept in sorted order
        assert errors == [(1e4, 0.2), (1e5, 0.1), (1e6, 0.3)]

    def test_tie_prefers_larger_beta(self, corpus, monkeypatch):
        table = {1e4: 0.1, 1e5: 0.1, 1e6: 0.3}
        monkeypatch.setattr(pl, "_run_on_matrices", self.fake_runner(table, []))
        chosen, _ = select_beta(corpus, small_config(beta_grid=(1e4, 1e5, 1e6)))
        assert chosen == 1e5
        table_all = {1e4: 0.1, 1e5: 0.1, 1e6: 0.1}
        monkeypatch.setattr(pl, "_run_on_matrices", self.fake_runner(table_all, []))
        chosen, _ = select_beta(corpus, small_config(beta_grid=(1e4, 1e5, 1e6)))
        assert chosen == 1e6

    def test_single_value_grid_skips_validation_runs(self, corpus, monkeypatch):
        def explode(*args, **kwargs):  # pragma: no cover - must not run
            raise AssertionError("no validation runs expected")

        monkeypatch.setattr(pl, "_run_on_matrices", explode)
        chosen, errors = select_beta(corpus, small_config(beta_grid=(1e5,)))
        assert chosen == 1e5
        assert len(errors) == 1 and np.isnan(errors[0][1])

    def test_rejects_non_posterior_methods(self, corpus):
        with pytest.raises(ValueError):
            select_beta(corpus, small_config(method="dae", beta_grid=()))

    def test_degenerate_split_rejected(self):
        docs = [SparseDoc([0], [1.0], 1), SparseDoc([1], [1.0], -1)]
        tiny = build_corpus(docs, [SparseDoc([0], [1.0], 1)])
        with pytest.raises(ValueError, match="degenerate"):
            select_beta(tiny, small_config(beta_grid=(1e4, 1e5)))


class TestRunArtifacts:
    def test_sbdae_run_dir_contents(self, corpus, tmp_path):
        out = tmp_path / "run"
        report = run(corpus, small_config(), out_dir=out)
        for name in ("linear_model.bdz", "posterior.bdz", "ae_model.bdz", "report.json", "manifest.json"):
            assert (out / name).is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["kind"] == "bregdae-run"
        assert manifest["method"] == "sbdae"
        assert set(manifest["files"]) == {"linear_model", "posterior", "ae_model", "report"}
        on_disk = json.loads((out / "report.json").read_text())
        assert on_disk == report.to_record()
        assert "seconds" not in on_disk

    def test_bow_run_dir_has_no_ae_artifacts(self, corpus, tmp_path):
        out = tmp_path / "run"
        run(corpus, small_config(method="bow", beta_grid=()), out_dir=out)
        assert (out / "linear_model.bdz").is_file()
        assert not (out / "posterior.bdz").exists()
        assert not (out / "ae_model.bdz").exists()

    def test_artifacts_replay_to_identical_errors(self, corpus, tmp_path):
        """Reloading saved stage outputs reproduces the reported numbers."""
        out = tmp_path / "run"
        cfg = small_config()
        report = run(corpus, cfg, out_dir=out)

        encoder = load_ae_model(out / "ae_model.bdz")
        x_train = to_csr(corpus.train, len(corpus.vocab))
        x_test = to_csr(corpus.test, len(corpus.vocab))
        y_train, y_test = labels_of(corpus.train), labels_of(corpus.test)
        f_train = extract_features(encoder, x_train)
        f_test = extract_features(encoder, x_test)
        final = train_svm2(
            f_train, y_train, cfg.svm_lambda, cfg.sgd("final_svm", cfg.epochs, cfg.learning_rate)
        )
        assert report.train_error == error_rate(final, f_train, y_train)
        assert report.test_error == error_rate(final, f_test, y_test)

        # the saved posterior is exactly the one the saved linear model implies
        linear = load_linear_model(out / "linear_model.bdz")
        post = load_posterior(out / "posterior.bdz")
        rebuilt = build_posterior(linear, x_train, y_train, post.beta, cfg.epsilon_floor)
        np.testing.assert_array_equal(post.theta_hat, rebuilt.theta_hat)
        np.testing.assert_array_equal(post.sigma_diag, rebuilt.sigma_diag)

    def test_runs_reproducible(self, corpus):
        cfg = small_config(method="sbdae+")
        a = run(corpus, cfg)
        b = run(corpus, cfg)
        assert a.to_record() == b.to_record()

    def test_posterior_untouched_by_unlabeled_docs(self, corpus_with_unlabeled, tmp_path):
        base = small_config()
        with_extra = small_config(use_unlabeled=True)
        run(corpus_with_unlabeled, base, out_dir=tmp_path / "a")
        run(corpus_with_unlabeled, with_extra, out_dir=tmp_path / "b")
        post_a = (tmp_path / "a" / "posterior.bdz").read_bytes()
        post_b = (tmp_path / "b" / "posterior.bdz").read_bytes()
        assert post_a == post_b
        ae_a = (tmp_path / "a" / "ae_model.bdz").read_bytes()
        ae_b = (tmp_path / "b" / "ae_model.bdz").read_bytes()
        assert ae_a != ae_b  # the encoder did see the extra documents

    def test_multi_beta_run_records_sweep(self, corpus):
        cfg = small_config(beta_grid=(1e4, 1e6), ae_epochs=2, epochs=3)
        report = run(corpus, cfg)
        assert report.chosen_beta in (1e4, 1e6)
        assert [b for b, _ in report.beta_errors] == [1e4, 1e6]
        assert all(0.0 <= e <= 1.0 for _, e in report.beta_errors)

    def test_stage_failure_is_named_and_chained(self):
        docs = [SparseDoc([0], [1.0], 1 if i < 7 else -1) for i in range(10)]
        corpus = build_corpus(docs, [SparseDoc([0], [1.0], 1)])
        cfg = small_config(method="bow", beta_grid=(), learning_rate=1e150, epochs=30)
        with pytest.raises(StageError, match="train_svm") as info:
            run(corpus, cfg)
        assert isinstance(info.value.__cause__, NumericalError)


class TestCompareAndRender:
    def test_compare_empty_rejected(self, corpus):
        with pytest.raises(ValueError):
            compare(corpus, [])

    def test_compare_runs_each_config(self, corpus):
        reports = compare(
            corpus,
            [small_config(method="bow", beta_grid=()), small_config(method="dae", hidden_size=8)],
        )
        assert [r.method for r in reports] == ["bow", "dae"]

    def test_render_table(self):
        reports = [
            RunReport("bow", None, 0.05, 0.125, 1.0, {}),
            RunReport("sbdae", 1e5, 0.025, 0.1, 2.0, {}),
        ]
        text = render_report_table(reports)
        lines = text.splitlines()
        assert lines[0].split() == ["method", "beta", "train", "error", "test", "error", "seconds"]
        assert lines[2].split() == ["bow", "-", "0.0500", "0.1250", "1.0"]
        assert lines[3].split() == ["sbdae", "1e+05", "0.0250", "0.1000", "2.0"]
