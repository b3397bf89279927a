import math

import pytest

import huda


def test_fpm_dynamics():
    fpm = huda.build_fpm()
    assert fpm.dims.n_xc == 4
    assert fpm.fc([0.0, 1.0, 0.0, 2.0]) == [1.0, 0.0, 2.0, -9.81]
    assert fpm.c([0.0, 0.0, 0.0, 0.0]) == [0.9, 0.9, 0.9, 0.9]


def test_drop_bounces_at_the_closed_form_time():
    fpm = huda.build_fpm()
    traj = huda.integrate(fpm, [0.0, 0.0, 0.0, 0.0], tf=0.6)
    assert len(traj.events) == 1
    ev = traj.events[0]
    t_star = math.sqrt(2 * 0.9 / 9.81)
    assert abs(ev["t"] - t_star) < 1e-6
    assert ev["q"] == [0, 0, 1, 0]
    assert ev["x_post"][2] == -0.9


def test_structural_analysis():
    report = huda.analyze("PSDa")
    assert report["order"] == ["c_a", "s_a", "c_b", "s_b", "c_z"]
    report_b = huda.analyze("PSDb")
    assert report_b["order"] == ["c_b", "s_b", "c_a", "s_a", "c_z"]
    generic = huda.analyze("generic")
    assert "order" not in generic
    assert "s_a" in generic["loops"]
    assert huda.loop_free("PSD")
    assert not huda.loop_free("generic")


def test_connection_json_round_trip():
    conn = huda.init_connections("PSD", noise_scale=0.05, seed=7)
    back = huda.ConnectionSet.from_json(conn.to_json())
    assert back.block("W_az") == conn.block("W_az")
    rows, cols, mask, data = conn.block("W_zb")
    assert (rows, cols, mask) == (4, 2, "trainable")


def test_combined_model_trains_a_little():
    fpm = huda.build_fpm()
    mlm = huda.ffnn_model(seed=3)
    conn = huda.init_connections("P", seed=3)
    cm = huda.combine(fpm, mlm, conn)
    assert cm.dims.n_p == 56 + 58

    data = [huda.generate_dataset(s) for s in (1, 2)]
    assert len(data[0].times) == 106
    out = huda.train(cm, data, steps=3, seed=1)
    assert len(out["history"]) == 3
    rerun = huda.train(cm, data, steps=3, seed=1)
    assert out["history"] == rerun["history"]


def test_dataset_against_test_scenario():
    sc = huda.scenario(5)
    assert sc.x0 == [-0.5, 2.0, 0.5, 2.0]
    assert not sc.training
    with pytest.raises(Exception):
        huda.scenario(6)
