"""End-to-end tests for the command-line interface."""

import pytest

from failsketch.cli import main
from failsketch.config import ConfigError, build_config, parse_config_text
from failsketch.presets import PRESETS


def read(path):
    return path.read_text(encoding="utf-8")


def test_simulate_zero_host_population(tmp_path):
    cfg = tmp_path / "zero.cfg"
    cfg.write_text("normal_count = 0\nworm_count = 0\n")
    code = main(
        ["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "out"), "--no-figures"]
    )
    assert code == 0
    lines = read(tmp_path / "out" / "hostreports_bitmap_p000.csv").splitlines()
    assert lines == ["src,k_true,k_hat_raw,k_hat,khat_s,khat_r,saturated,limited,rel_error"]


def test_simulate_writes_reports_snapshots_and_figures(tmp_path):
    out = tmp_path / "run"
    code = main(
        ["simulate", "--preset", "fig3-desk", "--seed", "5", "--out-dir", str(out)]
    )
    assert code == 0
    for name in (
        "hostreports_bitmap_p000.csv",
        "snapshot_bitmap_p000.frsk",
        "hosts_p000.txt",
        "summary.csv",
        "scatter_bitmap_p000.png",
    ):
        assert (out / name).exists(), name
    summary = read(out / "summary.csv").splitlines()
    assert summary[0].startswith("kind,period,hosts,bits_per_host")
    # memory floor preset: ~10 bits per host
    assert float(summary[1].split(",")[3]) == pytest.approx(10.0, abs=0.05)


def test_simulate_deterministic_output_bytes(tmp_path):
    args = ["simulate", "--preset", "fig3-desk", "--seed", "9", "--no-figures"]
    code = main(args + ["--out-dir", str(tmp_path / "a")])
    assert code == 0
    code = main(args + ["--out-dir", str(tmp_path / "b")])
    assert code == 0
    for name in ("hostreports_bitmap_p000.csv", "summary.csv", "hosts_p000.txt"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)
    assert (tmp_path / "a" / "snapshot_bitmap_p000.frsk").read_bytes() == (
        tmp_path / "b" / "snapshot_bitmap_p000.frsk"
    ).read_bytes()


def test_simulate_rejects_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_knob = 5\n")
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3


def test_simulate_rejects_unknown_preset(tmp_path):
    assert main(["simulate", "--preset", "fig99", "--out-dir", str(tmp_path / "o")]) == 3


def test_decode_round_trip(tmp_path):
    out = tmp_path / "sim"
    assert (
        main(["simulate", "--preset", "fig3-desk", "--seed", "2", "--out-dir", str(out), "--no-figures"])
        == 0
    )
    reports = tmp_path / "decoded.csv"
    code = main(
        [
            "decode", str(out / "snapshot_bitmap_p000.frsk"),
            "--hosts", str(out / "hosts_p000.txt"),
            "--threshold-per-min", "60",
            "--out", str(reports),
        ]
    )
    assert code == 0
    sim_lines = read(out / "hostreports_bitmap_p000.csv").splitlines()[1:]
    dec_lines = read(reports).splitlines()[1:]
    assert len(sim_lines) == len(dec_lines)
    for sim_row, dec_row in zip(sim_lines, dec_lines):
        s, d = sim_row.split(","), dec_row.split(",")
        assert s[0] == d[0]  # src
        assert s[2:8] == d[2:8]  # identical estimates and flags
        assert d[1] == "" and d[8] == ""  # no ground truth at the decoder


def test_decode_corrupt_snapshot_exit_code(tmp_path):
    snap = tmp_path / "bad.frsk"
    snap.write_bytes(b"FRSKgarbage-that-is-not-a-snapshot")
    hosts = tmp_path / "hosts.txt"
    hosts.write_text("1\n2\n")
    assert main(["decode", str(snap), "--hosts", str(hosts)]) == 2


def test_compare_rejects_empty_budgets(tmp_path):
    assert (
        main(
            ["compare", "--preset", "fig3-desk", "--budgets-mb", ",",
             "--out-dir", str(tmp_path / "o"), "--no-figures"]
        )
        == 3
    )


def test_compare_runs_and_is_deterministic(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(
        "normal_count = 400\nworm_count = 4\nworm_rate_model = fixed\n"
        "bitmap_logical = 128\nregister_virtual = 128\n"
    )
    args = [
        "compare", "--config", str(cfg), "--seed", "4",
        "--budgets-mb", "0.1,0.05", "--no-figures",
    ]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    table_a = read(tmp_path / "a" / "compare.csv")
    assert table_a == read(tmp_path / "b" / "compare.csv")
    lines = table_a.splitlines()
    assert lines[0].startswith("budget_bits,kind")
    assert len(lines) == 1 + 2 * 2  # two budgets x two kinds


def test_compare_register_kind_beats_saturated_bitmap_at_every_budget(tmp_path):
    # quarter-desk heavy-scanner setup: scanners sit far above the
    # bitmap's decodable ceiling at every budget on the ladder, so the
    # register kind must win each row of the comparison table
    cfg = tmp_path / "sat.cfg"
    cfg.write_text(
        "normal_count = 12500\nworm_count = 25\nworm_mean_rate = 6000\n"
        "worm_rate_model = fixed\nbitmap_logical = 512\nregister_virtual = 512\n"
    )
    out = tmp_path / "cmp"
    code = main(
        [
            "compare", "--config", str(cfg), "--seed", "3",
            "--budgets-mb", "0.125,0.0625,0.03125",
            "--out-dir", str(out), "--no-figures",
        ]
    )
    assert code == 0
    rows = {}
    header, *lines = read(out / "compare.csv").splitlines()
    cols = header.split(",")
    for line in lines:
        rec = dict(zip(cols, line.split(",")))
        rows.setdefault(rec["budget_bits"], {})[rec["kind"]] = float(
            rec["worm_mean_rel_error"]
        )
    assert len(rows) == 3
    for budget, by_kind in rows.items():
        assert by_kind["dsra"] <= by_kind["bitmap"], budget


def test_epidemic_identical_rates_identical_curves(tmp_path):
    out = tmp_path / "epi"
    code = main(
        [
            "epidemic", "--scan-rate-per-min", "600", "--limited-rate-per-min", "600",
            "--out-dir", str(out), "--no-figures",
        ]
    )
    assert code == 0
    for line in read(out / "epidemic_curve.csv").splitlines()[1:]:
        _, unlimited, limited = line.split(",")
        assert unlimited == limited


def test_epidemic_rate_ratio_scales_times(tmp_path):
    out = tmp_path / "epi"
    code = main(
        [
            "epidemic", "--scan-rate-per-min", "600", "--limited-rate-per-min", "6",
            "--alphas", "0.5", "--out-dir", str(out), "--no-figures",
        ]
    )
    assert code == 0
    row = read(out / "epidemic_times.csv").splitlines()[1].split(",")
    t_unlimited, t_limited, ratio = float(row[1]), float(row[2]), float(row[3])
    assert ratio == pytest.approx(100.0, rel=1e-9)
    assert t_limited == pytest.approx(100.0 * t_unlimited, rel=1e-9)
    # r = 10 addresses/s over a 2^32 space with 1e5 vulnerable, 1 seed
    # host: half infection near 4.945e4 s
    assert t_unlimited == pytest.approx(4.945e4, rel=1e-3)


def test_epidemic_rejects_bad_domain(tmp_path):
    assert (
        main(
            ["epidemic", "--vulnerable", "0", "--out-dir", str(tmp_path / "e"), "--no-figures"]
        )
        == 3
    )


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FAILSKETCH_SEED", "123")
    cfg = build_config(preset="fig3-desk")
    assert cfg.seed == 123
    monkeypatch.setenv("FAILSKETCH_NOT_A_KEY", "1")
    with pytest.raises(ConfigError):
        build_config(preset="fig3-desk")


def test_flag_overrides_beat_env(monkeypatch):
    monkeypatch.setenv("FAILSKETCH_SEED", "123")
    cfg = build_config(preset="fig3-desk", overrides={"seed": 7})
    assert cfg.seed == 7


def test_parse_config_text():
    parsed = parse_config_text("# comment\nseed = 9\nsketch = dsra  # trailing\n\n")
    assert parsed == {"seed": 9, "sketch": "dsra"}
    with pytest.raises(ConfigError):
        parse_config_text("seed: 9\n")
    with pytest.raises(ConfigError):
        parse_config_text("seed = banana\n")


def test_presets_cover_documented_grid():
    for name in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6"):
        assert name in PRESETS
        assert f"{name}-desk" in PRESETS
        full = build_config(preset=name)
        desk = build_config(preset=f"{name}-desk")
        # desk variants scale hosts and memory by 10, keeping bits/host
        assert full.normal_count == 10 * desk.normal_count
        assert full.bitmap_bits == 10 * desk.bitmap_bits
        full_ratio = full.bitmap_bits / (full.normal_count + full.worm_count)
        desk_ratio = desk.bitmap_bits / (desk.normal_count + desk.worm_count)
        assert full_ratio == pytest.approx(desk_ratio, rel=0.01)
