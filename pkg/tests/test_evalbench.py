import math
from dataclasses import replace

import numpy as np
import pytest

from cloudmarch import evalbench
from cloudmarch.camera import CameraPose
from cloudmarch.evalbench import (
    ExperimentSpec,
    canonical_specs,
    fig2_experiment,
    format_table,
    mean_luminance,
    report_csv,
    resolve_order,
    rmse,
    run_experiments,
)
from cloudmarch.noisefield import ConstantField, VolumeBounds, make_procedural_clouds
from cloudmarch.raymarch import RaymarchConfig
from cloudmarch.renderer import SceneConfig
from cloudmarch.transport import MediumParams

BOX = VolumeBounds((-4.0, 0.0, -4.0), (4.0, 2.0, 4.0))


def small_scene(field=None, medium=None, res=(16, 16), **kw):
    field = field if field is not None else make_procedural_clouds(5, 0.5, 3, 0.6, BOX, 0.5)
    if medium is None:
        sun = np.array([0.3, 0.8, 0.2])
        medium = MediumParams(2.0, 0.3, tuple(sun / np.linalg.norm(sun)), (8.0, 8.0, 8.0),
                              (0.5, 0.6, 0.8))
    cam = CameraPose.look_at((0.0, 3.0, -7.0), (0.0, 0.8, 0.0), vertical_fov=math.radians(55))
    return SceneConfig(field, medium, cam, background=(0.3, 0.4, 0.6), display_resolution=res, **kw)


class TestMetrics:
    def test_rmse_identical(self):
        a = np.random.default_rng(0).uniform(size=(4, 5, 3))
        assert rmse(a, a.copy()) == 0.0

    def test_rmse_unit(self):
        assert rmse(np.zeros((3, 3, 3)), np.ones((3, 3, 3))) == 1.0

    def test_rmse_half_pixels(self):
        a = np.zeros((4, 4, 3))
        b = a.copy()
        b[:2] = 0.2
        assert rmse(a, b) == pytest.approx(0.2 / math.sqrt(2), abs=1e-12)
        assert rmse(a, b) == pytest.approx(0.141421, abs=1e-6)

    def test_rmse_symmetric_bitwise(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = rng.normal(size=(2, 7, 9, 3))
            assert rmse(a, b) == rmse(b, a)

    def test_rmse_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))

    def test_mean_luminance(self):
        assert mean_luminance(np.zeros((2, 2, 3))) == 0.0
        assert mean_luminance(np.ones((2, 2, 3))) == pytest.approx(1.0, abs=1e-15)
        img = np.zeros((3, 3, 3))
        img[..., 0] = 0.5
        assert mean_luminance(img) == pytest.approx(0.1063, abs=1e-12)

    def test_mean_luminance_ignores_alpha(self):
        img = np.ones((2, 2, 4))
        img[..., 3] = 0.0
        assert mean_luminance(img) == pytest.approx(1.0, abs=1e-15)


class TestResolveOrder:
    def test_orders_references_first(self):
        s = small_scene()
        specs = [ExperimentSpec("b", s, reference="a"), ExperimentSpec("a", s, reference="a")]
        assert [x.name for x in resolve_order(specs)] == ["a", "b"]

    def test_cycle(self):
        s = small_scene()
        specs = [ExperimentSpec("a", s, reference="b"), ExperimentSpec("b", s, reference="a")]
        with pytest.raises(ValueError, match="cycle"):
            resolve_order(specs)

    def test_unknown_and_duplicate(self):
        s = small_scene()
        with pytest.raises(ValueError):
            resolve_order([ExperimentSpec("a", s, reference="zzz")])
        with pytest.raises(ValueError):
            resolve_order([ExperimentSpec("a", s), ExperimentSpec("a", s)])


class TestRunExperiments:
    def test_self_reference_zero(self):
        spec = ExperimentSpec("only", small_scene(raymarch=RaymarchConfig(n_steps=4)),
                              reference="only")
        rep = run_experiments([spec])
        row = rep["only"]
        assert row.ok and row.rmse_vs_reference == 0.0
        assert len(row.wall_times) == 5 and row.median_wall_time > 0

    def test_sample_ratio_one_sixteenth(self):
        s = small_scene(cloud_buffer_scale="half")
        mk = lambda n: replace(s.raymarch, n_steps=n, alpha_early_out=1.0)  # noqa: E731
        specs = [ExperimentSpec("half_128", s.with_changes(raymarch=mk(128))),
                 ExperimentSpec("half_8", s.with_changes(raymarch=mk(8)), reference="half_128")]
        rep = run_experiments(specs)
        assert rep["half_8"].density_samples * 16 == rep["half_128"].density_samples
        assert rep["half_8"].light_samples * 16 == rep["half_128"].light_samples
        assert rep["half_8"].rmse_vs_reference > 0

    def test_rejects_few_repeats(self):
        with pytest.raises(ValueError):
            run_experiments([ExperimentSpec("a", small_scene())], repeats=3)

    def test_failure_is_reported_not_raised(self, monkeypatch):
        real = evalbench._render_spec

        def flaky(spec):
            if spec.name == "bad":
                raise RuntimeError("boom")
            return real(spec)

        monkeypatch.setattr(evalbench, "_render_spec", flaky)
        s = small_scene(raymarch=RaymarchConfig(n_steps=2))
        specs = [ExperimentSpec("good", s), ExperimentSpec("bad", s),
                 ExperimentSpec("child", s, reference="bad")]
        rep = run_experiments(specs)
        assert rep.names() == ["good", "bad", "child"]
        assert rep["good"].ok
        assert "boom" in rep["bad"].error
        assert "reference" in rep["child"].error
        assert "RuntimeError: boom" in report_csv(rep)

    def test_resolution_mismatch_reported(self):
        a = small_scene(raymarch=RaymarchConfig(n_steps=2))
        b = small_scene(res=(8, 8), raymarch=RaymarchConfig(n_steps=2))
        rep = run_experiments([ExperimentSpec("a", a), ExperimentSpec("b", b, reference="a")])
        assert rep["a"].ok and not rep["b"].ok

    def test_dump_frames(self, tmp_path):
        spec = ExperimentSpec("x", small_scene(raymarch=RaymarchConfig(n_steps=2)))
        run_experiments([spec], dump_dir=tmp_path)
        assert (tmp_path / "x.ppm").read_bytes().startswith(b"P6\n16 16\n255\n")


class TestCanonical:
    def test_six_rows(self):
        specs = canonical_specs(small_scene(), taa_frames=4)
        assert [s.name for s in specs] == [
            "full_128", "half_128", "half_8", "half_8_jitter", "half_8_jitter_taa",
            "quarter_8_jitter_taa",
        ]
        got = [(s.scene.cloud_buffer_scale, s.scene.raymarch.n_steps, s.scene.raymarch.jitter_mode,
                s.scene.taa.enabled, s.n_frames) for s in specs]
        assert got == [
            ("full", 128, "off", False, 1),
            ("half", 128, "off", False, 1),
            ("half", 8, "off", False, 1),
            ("half", 8, "per_pixel", False, 1),
            ("half", 8, "per_pixel", True, 4),
            ("quarter", 8, "per_pixel", True, 4),
        ]
        assert all(s.reference == "full_128" for s in specs)

    def test_report_outputs(self, tmp_path):
        specs = canonical_specs(small_scene(res=(8, 8)), taa_frames=2)
        rep = run_experiments(specs)
        text = report_csv(rep)
        lines = text.strip().split("\n")
        assert lines[0].split(",") == list(evalbench.REPORT_COLUMNS)
        assert len(lines) == 7
        assert rep["full_128"].rmse_vs_reference == 0.0
        table = format_table(rep)
        assert len(table.strip().split("\n")) == 8
        paths = evalbench.write_report(rep, tmp_path)
        assert paths["report"].read_text() == text
        # Deterministic columns: a second run gives the same CSV bytes.
        assert report_csv(run_experiments(specs)) == text


class TestFig2:
    def test_constant_density_analytic_flat(self):
        # Constant density and spatially constant lighting (sun off).
        medium = MediumParams(1.5, 0.0, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0), (1.0, 0.9, 0.8))
        rep = fig2_experiment(small_scene(field=ConstantField(0.7, BOX), medium=medium))
        assert rep.spread("analytic") < 1e-9
        assert rep.spread("naive") > 1e-3

    def test_naive_spread_exceeds_analytic(self):
        rep = fig2_experiment(small_scene(res=(24, 24)))
        assert rep.spread("naive") > rep.spread("analytic")

    def test_naive_spread_shrinks_with_finer_steps(self):
        rep = fig2_experiment(small_scene(res=(24, 24)))
        lum = dict(zip(rep.step_counts, rep.luminance["naive"]))
        assert abs(lum[32] - lum[128]) > abs(lum[64] - lum[128]) > 0
        assert rep.spread("naive", (64, 128)) < rep.spread("naive", (32, 64, 128))

    def test_report_formats(self):
        medium = MediumParams(1.0, 0.0, (0.0, 1.0, 0.0), (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        rep = fig2_experiment(small_scene(field=ConstantField(0.5, BOX), medium=medium, res=(4, 4)),
                              step_counts=(8, 16))
        assert rep.to_csv().startswith("integration_mode,n_steps,mean_luminance\n")
        assert "spread" in rep.format()
