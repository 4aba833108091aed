import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pcqm import _kernels as K
from pcqm._jit import NUMBA_ENABLED
from pcqm.model import NbdModel
from pcqm.simulate import StudyWindow, SurveyDesign, gen_thomas, lhs_focal_points, sample_nbd_distances

needs_numba = pytest.mark.skipif(not NUMBA_ENABLED, reason="numba disabled")


@needs_numba
@pytest.mark.parametrize("size,ell,censor", [(50, 1, 0.0), (480, 2, 0.2), (6000, 3, 0.1)])
def test_loglik_twins_agree(size, ell, censor):
    r = sample_nbd_distances(NbdModel(0.05, 1.5, 4, ell), size, size)
    C = float(np.quantile(r, 1 - censor)) if censor else math.inf
    obs = r[r <= C]
    n0 = size - obs.size
    fa = K.NbdLogLik(obs, n0, ell, 4, C, backend="numba")
    fb = K.NbdLogLik(obs, n0, ell, 4, C, backend="numpy")
    for theta, phi in ((math.log(0.05), 0.4), (-1.0, -1.5), (-5.0, 8.0)):
        assert fa(theta, phi) == pytest.approx(fb(theta, phi), rel=1e-12)


def test_loglik_matches_density_sum():
    from pcqm.model import nbd_logpdf, nbd_sf

    m = NbdModel(0.04, 2.5, 4, 2)
    r = sample_nbd_distances(m, 300, 9)
    C = 12.0
    obs = r[r <= C]
    ref = float(np.sum(nbd_logpdf(m, obs))) + (r.size - obs.size) * math.log(nbd_sf(m, C))
    ll = K.NbdLogLik(obs, r.size - obs.size, 2, 4, C)
    assert ll(math.log(0.04), math.log(2.5)) == pytest.approx(ref, rel=1e-11)


@needs_numba
@pytest.mark.parametrize("ell,C", [(1, 10.0), (3, 10.0), (2, math.inf), (1, 0.5)])
def test_pcqm_twins_agree(ell, C):
    w = StudyWindow(0, 0, 200, 200)
    pattern = gen_thomas(0.01, 5, 2.0, w, 4)
    design = SurveyDesign(n=40, ell=ell, C=10.0)
    focals = lhs_focal_points(design, w, 5)
    index = K.GridIndex(pattern.points, 0, 0, 200, 200, 10.0)
    a = K.pcqm_distances(index, focals, 4, ell, C, backend="numba")
    b = K.pcqm_distances(index, focals, 4, ell, C, backend="numpy")
    assert np.array_equal(a, b, equal_nan=True)


def test_pcqm_brute_force():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 50, (400, 2))
    focals = rng.uniform(10, 40, (25, 2))
    index = K.GridIndex(pts, 0, 0, 50, 50, 5.0)
    got = K.pcqm_distances(index, focals, 4, 2, 6.0)
    for f, (px, py) in enumerate(focals):
        dx, dy = pts[:, 0] - px, pts[:, 1] - py
        d = np.hypot(dx, dy)
        sec = np.minimum((np.mod(np.arctan2(dy, dx), 2 * np.pi) * 4 / (2 * np.pi)).astype(int), 3)
        for s in range(4):
            ds = np.sort(d[(sec == s) & (d <= 6.0)])
            if ds.size >= 2:
                assert got[f, s] == pytest.approx(ds[1], rel=1e-14)
            else:
                assert np.isnan(got[f, s])


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, PCQM_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import pcqm; print(pcqm.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
