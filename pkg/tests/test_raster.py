import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceforge.errors import ParameterError
from faceforge.synthface import (
    Camera,
    SHLighting,
    build_mesh,
    default_shape_model,
    render,
    sample_attributes,
    synth_texture,
)
from faceforge.synthface.raster import (
    bilinear_sample,
    project_vertices,
    rasterize_depth,
    sh_irradiance,
)


def _mean_mesh():
    m = default_shape_model()
    return build_mesh(np.zeros(m.dim), m)


class TestCamera:
    def test_distance_validation(self):
        with pytest.raises(ParameterError):
            Camera(distance=0.0)

    def test_yaw_validation(self):
        with pytest.raises(ParameterError):
            Camera(yaw=120.0)

    def test_frontal_position(self):
        assert np.allclose(Camera(distance=2.5).position(), [0.0, 0.0, 2.5])

    def test_axes_orthonormal(self):
        for yaw, pitch in ((0, 0), (35, 0), (-35, 12), (45, -12)):
            r, u, f = Camera(yaw=yaw, pitch=pitch).axes()
            M = np.stack([r, u, f])
            assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)

    def test_forward_points_at_origin(self):
        cam = Camera(yaw=20.0, pitch=5.0)
        _, _, f = cam.axes()
        assert np.allclose(cam.position() + cam.distance * f, 0.0, atol=1e-12)


class TestSHIrradiance:
    def test_uniform_is_exactly_one(self):
        rng = np.random.default_rng(0)
        n = rng.normal(size=(200, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        irr = sh_irradiance(n, SHLighting.uniform().coeffs)
        assert np.max(np.abs(irr - 1.0)) < 1e-12

    def test_linearity_in_coeffs(self):
        rng = np.random.default_rng(1)
        n = rng.normal(size=(50, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        c1 = rng.normal(size=(3, 9))
        c2 = rng.normal(size=(3, 9))
        lhs = sh_irradiance(n, 2.0 * c1 + 3.0 * c2)
        rhs = 2.0 * sh_irradiance(n, c1) + 3.0 * sh_irradiance(n, c2)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_against_clamped_cosine_integral(self):
        # Oracle: irradiance is the hemisphere integral of the SH environment
        # against the clamped cosine.  Estimate it by quasi-uniform quadrature
        # over the sphere and compare at several normals.
        rng = np.random.default_rng(2)
        coeffs = SHLighting.random(rng).coeffs

        def sh_basis(d):
            x, y, z = d[..., 0], d[..., 1], d[..., 2]
            k = 1.0 / np.sqrt(4 * np.pi)
            return np.stack(
                [
                    np.full_like(x, k),
                    np.sqrt(3 / (4 * np.pi)) * y,
                    np.sqrt(3 / (4 * np.pi)) * z,
                    np.sqrt(3 / (4 * np.pi)) * x,
                    np.sqrt(15 / (4 * np.pi)) * x * y,
                    np.sqrt(15 / (4 * np.pi)) * y * z,
                    np.sqrt(5 / (16 * np.pi)) * (3 * z * z - 1),
                    np.sqrt(15 / (4 * np.pi)) * x * z,
                    np.sqrt(15 / (16 * np.pi)) * (x * x - y * y),
                ],
                axis=-1,
            )

        N = 400_000
        dirs = rng.normal(size=(N, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        env = sh_basis(dirs) @ coeffs.T  # (N, 3) radiance samples
        normals = np.array(
            [[0, 0, 1.0], [0, 1.0, 0], [1.0, 0, 0], [0.6, 0.0, 0.8]]
        )
        got = sh_irradiance(normals, coeffs)
        for i, n in enumerate(normals):
            cosw = np.maximum(dirs @ n, 0.0)
            mc = (env * cosw[:, None]).mean(axis=0) * 4 * np.pi
            assert np.allclose(got[i], mc, atol=0.03)


class TestProjection:
    def test_frontal_center(self):
        mesh = _mean_mesh()
        pts, zs = project_vertices(mesh, Camera(), 128)
        # the grid center vertex sits near (0, 0, z) and projects near center
        g = mesh.grid
        ci = (g // 2) * g + g // 2
        assert abs(pts[ci, 0] - 64.0) < 2.0
        assert abs(pts[ci, 1] - 64.0) < 2.0
        assert zs[ci] < Camera().distance  # in front of the camera plane

    def test_depth_positive(self):
        mesh = _mean_mesh()
        _, zs = project_vertices(mesh, Camera(yaw=30), 128)
        assert np.all(zs > 0)


class TestBilinearSample:
    def test_corner_exact(self):
        img = np.arange(12, dtype=np.float64).reshape(2, 2, 3)
        assert np.allclose(bilinear_sample(img, np.array([0.0]), np.array([0.0]))[0], img[0, 0])
        assert np.allclose(bilinear_sample(img, np.array([1.0]), np.array([1.0]))[0], img[1, 1])

    def test_center_average(self):
        img = np.arange(12, dtype=np.float64).reshape(2, 2, 3)
        mid = bilinear_sample(img, np.array([0.5]), np.array([0.5]))[0]
        assert np.allclose(mid, img.reshape(4, 3).mean(axis=0))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1))
    def test_constant_image(self, u, v, c):
        img = np.full((5, 7, 3), c)
        out = bilinear_sample(img, np.array([u]), np.array([v]))
        assert np.allclose(out, c, atol=1e-12)


class TestRender:
    def test_deterministic(self):
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(0))
        a = render(mesh, tex, Camera(), SHLighting.uniform(), res=64)
        b = render(mesh, tex, Camera(), SHLighting.uniform(), res=64)
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.depth, b.depth)

    def test_background_is_invalid(self):
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(0))
        out = render(mesh, tex, Camera(), SHLighting.uniform(), res=64)
        for y, x in ((0, 0), (0, 63), (63, 0), (63, 63)):
            assert not out.mask[y, x]
            assert np.isinf(out.depth[y, x])
            assert np.all(out.image[y, x] == 0.0)
        assert out.mask.any()

    def test_dc_scaling(self):
        # doubling a small DC light doubles every foreground pixel (pre-clip)
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(1))
        lo = render(mesh, tex, Camera(), SHLighting.dc(0.3), res=64)
        hi = render(mesh, tex, Camera(), SHLighting.dc(0.6), res=64)
        m = lo.mask
        assert np.allclose(hi.image[m], 2.0 * lo.image[m], atol=1e-12)

    def test_uniform_light_recovers_albedo(self):
        # under the normalized uniform environment the image equals the
        # bilinearly resampled albedo, so a flat texture renders exactly flat
        mesh = _mean_mesh()
        tex = np.full((64, 64, 3), 0.37)
        out = render(mesh, tex, Camera(), SHLighting.uniform(), res=96)
        assert np.allclose(out.image[out.mask], 0.37, atol=1e-9)

    def test_supersample_agrees_on_smooth_regions(self):
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(2))
        a = render(mesh, tex, Camera(), SHLighting.uniform(), res=64).image
        b = render(mesh, tex, Camera(), SHLighting.uniform(), res=64, supersample=2).image
        assert np.abs(a - b).mean() < 0.02

    def test_yaw_moves_silhouette(self):
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(3))
        left = render(mesh, tex, Camera(yaw=35), SHLighting.uniform(), res=64)
        right = render(mesh, tex, Camera(yaw=-35), SHLighting.uniform(), res=64)
        cols = np.arange(64)
        cl = (left.mask * cols[None, :]).sum() / left.mask.sum()
        cr = (right.mask * cols[None, :]).sum() / right.mask.sum()
        assert cl != pytest.approx(cr, abs=0.5)

    def test_depth_buffer_monotone_with_distance(self):
        mesh = _mean_mesh()
        tex = synth_texture(sample_attributes(4))
        near = render(mesh, tex, Camera(distance=2.0), SHLighting.uniform(), res=64)
        far = render(mesh, tex, Camera(distance=3.0), SHLighting.uniform(), res=64)
        m = near.mask & far.mask
        assert np.all(far.depth[m] > near.depth[m])

    def test_sh_shape_contract(self):
        with pytest.raises(ParameterError):
            SHLighting(coeffs=np.zeros((9, 3)))
