import math

import numpy as np
import pytest

from locsim.analysis import mzi_visibility
from locsim.cli import EXIT_CONFIG, EXIT_MODEL, EXIT_NETLIST, main
from locsim.config import DEFAULTS, defaults_text, read_config
from locsim.emitter import EmitterParams, g2_analytic
from locsim.errors import ConfigError
from locsim.experiments import run_duality, run_fringe, run_hbt
from locsim.netlist import chip_netlist


def report(path):
    out = {}
    for line in (path / "report.txt").read_text().splitlines():
        key, _, value = line.partition(": ")
        out[key] = value
    return out


class TestConfig:
    def test_defaults(self):
        cfg = read_config()
        assert cfg.input_mode == "a"
        assert cfg.channel.chip_transmission == 0.6
        assert cfg.channel.jitter_sigma_ns == (0.5,) * 4
        assert cfg.channel.dead_time_ns == (50.0,) * 4
        assert cfg.emitter.rate_sum == pytest.approx(math.log(2) / 2)
        assert cfg.emitter.emission_rate() == pytest.approx(1e-4, rel=1e-5)
        assert len(cfg.phis) == 32

    def test_defaults_text_round_trips(self, tmp_path):
        p = tmp_path / "d.ini"
        p.write_text(defaults_text())
        assert read_config(p).emitter == read_config().emitter
        assert "version" in defaults_text()

    def test_pi_literals(self, write_config):
        cfg = read_config(write_config("[fringe]\nphis = 0, pi/2, pi, 3pi/2, 2pi\n"))
        np.testing.assert_allclose(cfg.phis, [0, math.pi / 2, math.pi, 1.5 * math.pi, 2 * math.pi])

    def test_per_detector_lists(self, write_config):
        cfg = read_config(write_config("[channel]\ndetector_efficiency = 1, 0.5, 0.5, 1\n"))
        assert cfg.channel.detector_efficiency == (1.0, 0.5, 0.5, 1.0)

    @pytest.mark.parametrize("extra", [
        "[bogus]\nx = 1\n",
        "[emitter]\nlifetime = 3\n",
        "[channel]\nchip_transmission = 2\n",
        "[hbt]\npair = e,e\n",
        "[hbt]\nbin_width_ns = 0.3\nmax_tau_ns = 1\n",
        "[fringe]\nphi_points = 0\n",
        "[experiment]\nseed = abc\n",
        "[emitter]\ndip_fwhm_ns = 4\nlifetime_ns = 1\n",
    ])
    def test_rejects(self, write_config, extra):
        with pytest.raises(ConfigError):
            read_config(write_config(extra))

    def test_pump_rate_overrides_fwhm(self, write_config):
        cfg = read_config(write_config("[emitter]\npump_rate_per_ns = 0.2\nlifetime_ns = 1\n"))
        assert cfg.emitter.pump_rate_per_ns == 0.2

    def test_every_default_key_known(self):
        assert set(DEFAULTS) >= {"experiment", "emitter", "channel", "fringe", "hbt", "duality"}


class TestFringe:
    def test_single_phase_zero(self, write_config):
        cfg = read_config(write_config("[fringe]\nphis = 0\n"))
        res = run_fringe(cfg)
        r = {d: res.rates[d][0] for d in "efgh"}
        assert r["g"] == 0.0
        n = 1e5
        for d in "ef":
            assert abs(r[d] - r["h"]) / r["h"] < 3 * math.sqrt(2 * 3 / n)

    def test_interferometer_share_conserved(self, write_config):
        res = run_fringe(read_config(write_config("[fringe]\nphi_points = 12\n", n=50_000)))
        total = res.rates["g"] + res.rates["h"]
        rate = res.rates["e"].mean() * 3
        # one-third share, binomial spread of a 1/3 draw from ~5e4 photons
        sigma = rate * math.sqrt((1 / 3) * (2 / 3) / 50_000)
        assert np.all(np.abs(total - rate / 3) < 3 * sigma + 3 * rate * math.sqrt(1 / 50_000) / 3)

    def test_imbalanced_couplers_reduce_dark_port(self, tmp_path, write_config):
        net = tmp_path / "imb.lo"
        net.write_text(chip_netlist(("0.47", "0.47", "1/3", "1/3")))
        cfg = read_config(write_config(f"[experiment]\nnetlist = {net}\n[fringe]\nphi_points = 16\n"))
        res = run_fringe(cfg)
        assert mzi_visibility(0.47, 0.47, "dark") < 0.999
        assert res.fitted_visibility("g") == pytest.approx(mzi_visibility(0.47, 0.47, "dark"), abs=0.01)
        assert res.fitted_visibility("h") > 0.99


class TestCorrelationRuns:
    def test_hbt_ef_ideal_fine_bins(self, write_config):
        cfg = read_config(write_config("[hbt]\nbin_width_ns = 0.02\nmax_tau_ns = 2\n", n=1_000_000))
        run = run_hbt(cfg)
        assert run.g2_zero < 0.02

    def test_hbt_gh_at_quarter_turn_shows_dip(self, write_config):
        cfg = read_config(write_config("[hbt]\npair = g,h\nphi = pi/2\nbin_width_ns = 0.5\nmax_tau_ns = 10\n",
                                       n=1_000_000))
        run = run_hbt(cfg)
        assert run.rates["g"] == pytest.approx(run.rates["h"], rel=0.02)
        assert run.g2_zero < 0.5
        assert run.g2_zero == pytest.approx(run.oracle_g2_zero, abs=0.05)

    def test_hbt_zero_click_detector_flagged(self, write_config):
        cfg = read_config(write_config("[hbt]\npair = g,h\nphi = 0\n", n=10_000))
        run = run_hbt(cfg)
        assert run.flags and "g" in run.flags[0]
        assert not run.histogram.valid

    def test_duality_ideal(self, write_config):
        res = run_duality(read_config(write_config(n=200_000)))
        assert res.suppression_ratio < 0.01

    def test_duality_jitter_keeps_suppression(self, write_config):
        res = run_duality(read_config(write_config(n=1_000_000, jitter=0.5)))
        assert res.suppression_ratio < 0.01
        assert res.g2_zero == pytest.approx(res.correlation.oracle_g2_zero, abs=0.05)

    def test_duality_dark_counts_raise_floor(self, write_config):
        # Accidentals between a dark click and a photon click fill the dip. With photon
        # click rates r_h, r_f and dark rate d the measured correlation is
        # (r_h r_f g2 + d (r_h + r_f) + d^2) / ((r_h + d)(r_f + d)).
        emitter = EmitterParams()
        eff = 3e-5 / emitter.emission_rate()  # r_h = r_f = 1e-5 per ns
        extra = f"[emitter]\ncollection_efficiency = {eff!r}\n[duality]\nbin_width_ns = 0.5\nmax_tau_ns = 20\n"
        n = 9_000_000
        clean = run_duality(read_config(write_config(extra, n=n, seed=3)))
        dark = run_duality(read_config(write_config(extra, n=n, seed=3, dark=1e-6)))
        h = dark.correlation.histogram
        centre = np.abs(h.centers) < 4
        r, d = 1e-5, 1e-6
        mean_g2 = g2_analytic(h.centers[centre], emitter).mean()
        predicted = (r * r * mean_g2 + 2 * d * r + d * d) / (r + d) ** 2
        observed = h.normalized[centre].mean()
        expected_counts = h.accidental_level * predicted * centre.sum()
        sigma = math.sqrt(expected_counts) / (h.accidental_level * centre.sum())
        assert abs(observed - predicted) < 3 * sigma
        # Same seed, same photon clicks: the extra coincidences are exactly the pairs
        # that involve a dark click, expected (2 d r + d^2) * window * duration of them.
        clean_h = clean.correlation.histogram
        np.testing.assert_array_equal(clean_h.edges, h.edges)
        extra = int(h.counts[centre].sum() - clean_h.counts[centre].sum())
        expected_extra = (2 * d * r + d * d) * h.bin_width_ns * centre.sum() * h.duration_ns
        assert abs(extra - expected_extra) < 3 * math.sqrt(expected_extra)
        assert extra > 3 * math.sqrt(expected_extra)
        assert observed > clean_h.normalized[centre].mean()
        # the dark port now clicks at the dark rate alone
        assert dark.suppression_ratio == pytest.approx(d / (r + d), rel=0.02)


class TestCommandLine:
    def test_fringe_outputs(self, tmp_path, write_config):
        out = tmp_path / "out"
        cfg = write_config("[fringe]\nphi_points = 8\n[report]\nfigures = yes\n", n=20_000)
        assert main(["fringe", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "fringe.csv").read_text().splitlines()
        assert lines[0] == "phi_rad,rate_e,rate_f,rate_g,rate_h"
        assert len(lines) == 9
        assert "fitted_visibility_g" in report(out)
        assert (out / "fringe.png").stat().st_size > 0

    def test_hbt_outputs_and_pair_flag(self, tmp_path, write_config):
        out = tmp_path / "o"
        cfg = write_config("[report]\nfigures = yes\n", n=20_000)
        assert main(["hbt", "--config", str(cfg), "--out", str(out), "--pair", "e,h"]) == 0
        assert (out / "g2_eh.csv").read_text().startswith("tau_ns,counts,g2\n")
        assert (out / "g2_eh.png").exists()
        rep = report(out)
        assert rep["pair"] == "e,h" and "g2_0_oracle" in rep

    @pytest.mark.parametrize("command", ["dualty-check", "duality"])
    def test_duality_alias(self, tmp_path, write_config, command):
        out = tmp_path / command
        assert main([command, "--config", str(write_config(n=20_000)), "--out", str(out)]) == 0
        rep = report(out)
        assert float(rep["suppression_ratio"]) == 0.0
        assert (out / "g2_hf.csv").exists()

    def test_simulate(self, tmp_path, write_config):
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(write_config(n=1000)), "--out", str(out)]) == 0
        em = (out / "emissions.csv").read_text().splitlines()
        clicks = (out / "clicks.csv").read_text().splitlines()
        assert em[0] == "emission_ns" and clicks[0] == "detector,click_ns,truth"
        vals = [float(x) for x in em[1:]]
        assert vals == sorted(vals)
        assert len(clicks) - 1 == len(em) - 1  # lossless, no dark counts

    def test_seed_override_and_determinism(self, tmp_path, write_config):
        cfg = str(write_config(n=20_000))
        for name in ("a", "b"):
            assert main(["hbt", "--config", cfg, "--out", str(tmp_path / name), "--seed", "9"]) == 0
        assert main(["hbt", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "10"]) == 0
        a, b, c = ((tmp_path / n / "g2_ef.csv").read_bytes() for n in "abc")
        assert a == b and a != c

    def test_validate(self, capsys):
        assert main(["validate"]) == 0
        assert "4 modes, 5 elements" in capsys.readouterr().out

    def test_netlist_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.lo"
        bad.write_text("MODES 2\nDC 0 3 0.5\n")
        assert main(["validate", "--netlist", str(bad)]) == EXIT_NETLIST
        assert "bad.lo:2" in capsys.readouterr().err

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[channel]\nchip_transmission = 7\n")
        assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG
        assert main(["validate", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG

    def test_model_error_exit_code(self, tmp_path, write_config):
        net = tmp_path / "two.lo"
        net.write_text("MODES 2\nINPUTS a b\nOUTPUTS e f\nDC 0 1 1/2\n")
        cfg = write_config(n=1000)
        assert main(["simulate", "--config", str(cfg), "--netlist", str(net), "--out", str(tmp_path)]) == EXIT_MODEL

    def test_validate_unknown_input(self, tmp_path, write_config):
        cfg = write_config("[experiment]\ninput_mode = z\n")
        assert main(["validate", "--config", str(cfg)]) == EXIT_CONFIG

    def test_codes_distinct(self):
        assert len({0, EXIT_CONFIG, EXIT_NETLIST, EXIT_MODEL, 2}) == 5
