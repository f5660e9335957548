import numpy as np
import pytest

from footnav.gaitsim import GaitParams, build_square_walk
from footnav.logio import (
    DataError,
    TruthTable,
    read_imu_csv,
    read_range_csv,
    read_trajectory_csv,
    write_geojson,
    write_imu_csv,
    write_range_csv,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def sim():
    p = GaitParams(side_strides=2, laps=1, sigma_g=1e-4, sigma_a=1e-3,
                   range_noise=0.02, tail=0.4)
    return build_square_walk(p, seed=5)


def test_imu_round_trip_bit_exact(sim, tmp_path):
    path = tmp_path / "imu.csv"
    write_imu_csv(path, sim.imu_left, sim.imu_right)
    left, right = read_imu_csv(path)
    np.testing.assert_array_equal(left.t, sim.imu_left.t)
    np.testing.assert_array_equal(left.gyro, sim.imu_left.gyro)
    np.testing.assert_array_equal(left.accel, sim.imu_left.accel)
    np.testing.assert_array_equal(right.gyro, sim.imu_right.gyro)


def test_range_round_trip_bit_exact(sim, tmp_path):
    path = tmp_path / "range.csv"
    write_range_csv(path, sim.ranges)
    back = read_range_csv(path)
    np.testing.assert_array_equal(back.t, sim.ranges.t)
    np.testing.assert_array_equal(back.d, sim.ranges.d)


def test_truth_round_trip_bit_exact(sim, tmp_path):
    path = tmp_path / "truth.csv"
    tabs = [TruthTable.from_stream(sim.truth_left), TruthTable.from_stream(sim.truth_right)]
    write_trajectory_csv(path, tabs)
    back = read_trajectory_csv(path)
    for tab in tabs:
        got = back[tab.foot]
        np.testing.assert_array_equal(got.t, tab.t)
        np.testing.assert_array_equal(got.lat, tab.lat)
        np.testing.assert_array_equal(got.h, tab.h)
        np.testing.assert_array_equal(got.vel, tab.vel)
        np.testing.assert_array_equal(got.euler, tab.euler)
        np.testing.assert_array_equal(got.stance, tab.stance)


def test_two_line_file_round_trip(tmp_path):
    from footnav.strapdown import ImuStream

    left = ImuStream(np.array([0.0, 0.01]), np.array([[1e-3, 2e-3, -1e-3]] * 2),
                     np.array([[0.1, 9.8, -0.2]] * 2), "L")
    right = ImuStream(np.array([0.0, 0.01]), np.zeros((2, 3)), np.zeros((2, 3)), "R")
    path = tmp_path / "imu.csv"
    write_imu_csv(path, left, right)
    l2, r2 = read_imu_csv(path)
    np.testing.assert_array_equal(l2.gyro, left.gyro)
    first = path.read_text().splitlines()
    write_imu_csv(path, l2, r2)
    assert path.read_text().splitlines() == first  # writer/parser inverse


def test_empty_imu_file_errors(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,foot,gx,gy,gz,ax,ay,az\n")
    with pytest.raises(DataError, match="no samples"):
        read_imu_csv(path)


def test_missing_foot_errors(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text(
        "t,foot,gx,gy,gz,ax,ay,az\n"
        "0,L,0,0,0,0,9.8,0\n"
        "0.01,L,0,0,0,0,9.8,0\n"
    )
    with pytest.raises(DataError, match="foot R"):
        read_imu_csv(path)


def test_out_of_order_timestamps_name_line(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text(
        "t,foot,gx,gy,gz,ax,ay,az\n"
        "0,L,0,0,0,0,9.8,0\n"
        "0.02,L,0,0,0,0,9.8,0\n"
        "0.01,L,0,0,0,0,9.8,0\n"
    )
    with pytest.raises(DataError, match="imu.csv:4"):
        read_imu_csv(path)


def test_malformed_line_errors(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,foot,gx,gy,gz,ax,ay,az\n0,L,abc,0,0,0,9.8,0\n")
    with pytest.raises(DataError, match="imu.csv:2"):
        read_imu_csv(path)
    path.write_text("t,foot,gx,gy,gz,ax,ay,az\n0,X,0,0,0,0,9.8,0\n")
    with pytest.raises(DataError, match="foot tag"):
        read_imu_csv(path)
    path.write_text("t,foot,gx,gy,gz,ax,ay,az\n0,L,0,0\n")
    with pytest.raises(DataError, match="expected 8 fields"):
        read_imu_csv(path)


def test_nan_rejected(tmp_path):
    path = tmp_path / "range.csv"
    path.write_text("t,d\n0,nan\n")
    with pytest.raises(DataError, match="non-finite"):
        read_range_csv(path)


def test_bad_header(tmp_path):
    path = tmp_path / "range.csv"
    path.write_text("time,dist\n0,0.5\n")
    with pytest.raises(DataError, match="header"):
        read_range_csv(path)


def test_negative_range_rejected(tmp_path):
    path = tmp_path / "range.csv"
    path.write_text("t,d\n0,-0.5\n")
    with pytest.raises(DataError, match="non-positive"):
        read_range_csv(path)


def test_geojson_structure(sim, tmp_path):
    import json

    path = tmp_path / "traj.geojson"
    tabs = [TruthTable.from_stream(sim.truth_left)]
    write_geojson(path, tabs, properties={"variant": "zupt"}, stride=5)
    doc = json.loads(path.read_text())
    assert doc["type"] == "FeatureCollection"
    feat = doc["features"][0]
    assert feat["geometry"]["type"] == "LineString"
    lon, lat = feat["geometry"]["coordinates"][0]
    assert lon == pytest.approx(121.0, abs=1e-6)
    assert lat == pytest.approx(31.0, abs=1e-6)
    assert feat["properties"]["variant"] == "zupt"
