import numpy as np
import pytest

pytest.importorskip("hypothesis")
from hypothesis import given, settings  # noqa: E402
from hypothesis import strategies as st  # noqa: E402

from pipeline.export import mesh_arrays  # noqa: E402
from twistor.algebra import complex_product6, herm_product4, wedge_to_hex  # noqa: E402
from twistor.surface import SurfaceSample, envelope_reconstruct, hex_embed, hex_normalize, sample_spheres  # noqa: E402

coord = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
vector3 = st.tuples(coord, coord, coord)
complex4 = st.lists(st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False),
                    min_size=4, max_size=4)


@given(complex4, complex4)
def test_hermitian_product_symmetry(a, b):
    a, b = np.array(a), np.array(b)
    assert herm_product4(a, b) == pytest.approx(np.conj(herm_product4(b, a)), abs=1e-9)


@given(complex4, complex4)
def test_wedge_is_null(a, b):
    y = wedge_to_hex(np.array(a), np.array(b))
    scale = max(1.0, float(np.sum(np.abs(y) ** 2)))
    assert abs(complex_product6(y, y)) <= 1e-12 * scale


@given(vector3, st.floats(min_value=-5.0, max_value=5.0, allow_nan=False))
def test_hex_embed_inverts(center, radius):
    c, r = hex_normalize(hex_embed(center, radius))
    assert np.allclose(c, center, atol=1e-9)
    assert float(r) == pytest.approx(radius, abs=1e-9)


@settings(max_examples=50)
@given(vector3, vector3, st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=0.1, max_value=3.0))
def test_envelope_round_trip(r, direction, w1, gap):
    n = np.array(direction)
    if np.linalg.norm(n) < 1e-3:
        n = np.array([0.0, 0.0, 1.0])
    n = n / np.linalg.norm(n)
    sample = SurfaceSample(r=np.array(r), n=n, w1=w1, w2=w1 + gap)
    # hex_embed 的 y⁰ + y¹ 恒为 1, 不会退化为平面
    out = envelope_reconstruct(*sample_spheres(sample))
    assert np.allclose(out.r, sample.r, atol=1e-6)
    assert np.allclose(out.n, n, atol=1e-6)


@given(st.integers(min_value=2, max_value=6), st.integers(min_value=2, max_value=6), st.data())
def test_mesh_faces_index_valid_vertices(n1, n2, data):
    valid = np.array(data.draw(st.lists(st.booleans(), min_size=n1 * n2, max_size=n1 * n2))).reshape(n1, n2)
    g1, g2 = np.meshgrid(np.arange(n1, dtype=float), np.arange(n2, dtype=float), indexing="ij")
    points = np.stack([g1, g2, g1 * g2], axis=-1)
    vertices, faces = mesh_arrays(points, valid)
    assert len(vertices) == int(valid.sum())
    cells = valid[:-1, :-1] & valid[1:, :-1] & valid[1:, 1:] & valid[:-1, 1:]
    assert len(faces) == 2 * int(cells.sum())
    if len(faces):
        assert faces.min() >= 0 and faces.max() < len(vertices)
