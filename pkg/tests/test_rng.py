import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvchaos.rng import BrownianDriver, CoarsenedDriver, _gaussian_fill, gaussian_block, philox4x32

# Known-answer vectors for Philox4x32-10 from the Random123 distribution.
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(ctr, key, expected):
    assert tuple(int(v) for v in philox4x32(ctr, key)) == expected


@given(st.integers(0, 2**64 - 1), st.integers(0, 50), st.integers(0, 2**20), st.integers(0, 2**33))
def test_compiled_fill_matches_reference(seed, rep, step, block):
    ids = np.array([2 * block, 2 * block + 1], dtype=np.uint64)
    out = np.empty((1, 2, 1))
    _gaussian_fill(np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32), np.array([rep], dtype=np.uint64),
                   np.uint64(step), ids, 1, out)
    ref = gaussian_block(seed, rep, step, block)
    np.testing.assert_array_equal(out[0, :, 0], ref)


def test_draws_do_not_depend_on_batching_or_order():
    drv = BrownianDriver(11)
    full = drv.normals(5, np.arange(20), 3)
    perm = np.random.default_rng(0).permutation(20)
    np.testing.assert_array_equal(drv.normals(5, perm, 3), full[perm])
    np.testing.assert_array_equal(drv.normals(5, np.arange(7), 3), full[:7])


def test_replication_axis_matches_single_streams():
    batched = BrownianDriver(5).for_replications([0, 3, 9]).normals(2, np.arange(4), 1)
    for i, r in enumerate([0, 3, 9]):
        single = BrownianDriver(5).for_replications([r]).normals(2, np.arange(4), 1)[0]
        np.testing.assert_array_equal(batched[i], single)


def test_streams_differ_across_steps_seeds_and_replications():
    a = BrownianDriver(1).normals(1, np.arange(100), 1)
    assert not np.array_equal(a, BrownianDriver(1).normals(2, np.arange(100), 1))
    assert not np.array_equal(a, BrownianDriver(2).normals(1, np.arange(100), 1))
    b = BrownianDriver(1).for_replications([1]).normals(1, np.arange(100), 1)[0]
    assert not np.array_equal(a, b)


def test_normals_are_standard():
    z = BrownianDriver(123).normals(1, np.arange(200_000), 1).ravel()
    assert abs(z.mean()) < 5 / np.sqrt(len(z))
    assert abs(z.var() - 1) < 5 * np.sqrt(2 / len(z))
    assert abs(np.mean(z**4) - 3) < 0.05


def test_draw_tracking():
    drv = BrownianDriver(0, track=True)
    drv.normals(3, [4, 5], 2)
    drv.increments(3, [4], 0.1, 2)
    assert drv.draws[(4, 3)] == 2 and drv.draws[(5, 3)] == 1


def test_coarsened_increments_sum_fine_ones():
    base = BrownianDriver(9)
    coarse = CoarsenedDriver(base, 4)
    dt = 0.04
    fine = sum(base.increments(s, np.arange(3), dt / 4, 1) for s in range(5, 9))
    np.testing.assert_allclose(coarse.increments(2, np.arange(3), dt, 1), fine, rtol=0, atol=1e-15)


def test_seed_range_checked():
    with pytest.raises(ValueError):
        BrownianDriver(-1)
    with pytest.raises(ValueError):
        BrownianDriver(2**64)
