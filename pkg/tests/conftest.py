import numpy as np
import pytest


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {status}: {name}", flush=True)

from lanegap.core import ImageBuffer, ImageSet
from lanegap.synth import CameraSpec, SceneSpec, Straight, Arc, TrackSpec, VehicleState, render_frame
from lanegap.synth.render import _geometry


@pytest.fixture(scope="session")
def fast_cam() -> CameraSpec:
    """Half-resolution camera used where render throughput matters."""
    return CameraSpec(width=404, height=310)


@pytest.fixture(scope="session")
def curve_track() -> TrackSpec:
    return TrackSpec(segments=(Straight(20.0), Arc(150.0, 45.0), Straight(40.0)))


@pytest.fixture(scope="session")
def rendered_frames(fast_cam, curve_track) -> ImageSet:
    """20 frames along the curve track, vehicle on the centerline."""
    geo = _geometry(curve_track)
    scene = SceneSpec()
    imgs = []
    for s in np.linspace(0.0, geo.length - 25.0, 20):
        x, y, heading = geo.pose(float(s))
        state = VehicleState(x=x, y=y, heading=heading, speed=0.0)
        imgs.append(render_frame(scene, fast_cam, state, curve_track))
    return ImageSet(label="curve20", images=tuple(imgs))


def make_image(arr) -> ImageBuffer:
    return ImageBuffer.from_array(np.asarray(arr, dtype=np.uint8))
