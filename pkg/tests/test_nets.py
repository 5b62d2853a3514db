import numpy as np
import pytest
import torch

from faceforge.errors import ParameterError, VocabularyError
from faceforge.nets import (
    ConditionalUNet2d,
    CrossAttention,
    DualEncoder,
    IdentityUNet1d,
    QualityClassifier,
    ResBlock1d,
    ResBlock2d,
    TextEncoder,
    TextureVAE,
    TimeMLP,
    timestep_embedding,
)
from faceforge.vocab import MAX_TOKENS, vocab_size


def _randomize(model: torch.nn.Module, seed: int = 0) -> None:
    """Replace every parameter (incl. zero-initialized heads) with noise."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * 0.2)


def _fd_check(model, loss_fn, n_entries=4, h=1e-5, tol=1e-3, seed=0):
    """Central finite differences vs autograd on randomly sampled weights."""
    model.double()
    _randomize(model, seed)
    loss = loss_fn(model)
    params = [p for p in model.parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    rng = np.random.default_rng(seed)
    checked = 0
    for p, g in zip(params, grads):
        if g is None:
            continue
        for _ in range(n_entries):
            idx = tuple(rng.integers(0, s) for s in p.shape)
            with torch.no_grad():
                orig = p[idx].item()
                p[idx] = orig + h
                lp = loss_fn(model).item()
                p[idx] = orig - h
                lm = loss_fn(model).item()
                p[idx] = orig
            fd = (lp - lm) / (2 * h)
            ana = g[idx].item()
            if max(abs(fd), abs(ana)) < 1e-6:
                continue  # both zero to within finite-difference noise
            assert abs(fd - ana) / max(abs(fd), abs(ana)) < tol, (
                f"{type(model).__name__} grad mismatch: fd={fd} ana={ana}"
            )
            checked += 1
    assert checked > 0


class TestTimestepEmbedding:
    def test_shape_and_range(self):
        e = timestep_embedding(torch.tensor([1, 500, 1000]), 64)
        assert e.shape == (3, 64)
        assert torch.all(e.abs() <= 1.0 + 1e-12)

    def test_t_zero_is_cos_one_sin_zero(self):
        e = timestep_embedding(torch.tensor([0]), 8)
        assert torch.allclose(e[0, :4], torch.ones(4))
        assert torch.allclose(e[0, 4:], torch.zeros(4))

    def test_distinct_timesteps_distinct(self):
        e = timestep_embedding(torch.arange(1, 1001), 64)
        assert torch.unique(e, dim=0).shape[0] == 1000


@pytest.fixture(scope="module")
def enc():
    torch.manual_seed(0)
    return TextEncoder(vocab_size())


@pytest.fixture(scope="module")
def vae():
    torch.manual_seed(1)
    return TextureVAE()


class TestTextEncoder:
    def test_shapes(self, enc):
        ids = torch.randint(0, vocab_size(), (77,))
        assert enc(ids).shape == (77, 128)
        assert enc(ids[None]).shape == (1, 77, 128)

    def test_empty_is_null(self, enc):
        out = enc(torch.zeros(0, dtype=torch.long))
        assert out.shape == (1, 128)
        assert torch.equal(out, enc.null_embedding())
        assert torch.equal(enc.null_embedding(), enc.null_embedding())

    def test_positional_encoding_active(self, enc):
        ids = torch.tensor([5, 9, 14, 3])
        assert not torch.allclose(enc(ids), enc(ids.flip(0)))

    def test_length_contract(self, enc):
        with pytest.raises(VocabularyError):
            enc(torch.zeros(MAX_TOKENS + 1, dtype=torch.long))

    def test_unknown_token(self, enc):
        with pytest.raises(VocabularyError):
            enc(torch.tensor([vocab_size()]))

    def test_deterministic(self, enc):
        ids = torch.randint(0, vocab_size(), (12,))
        assert torch.equal(enc(ids), enc(ids))


class TestTextureVAE:
    def test_encode_shape(self, vae):
        m, lv = vae.encode(torch.rand(2, 3, 64, 64))
        assert m.shape == (2, 4, 8, 8) and lv.shape == (2, 4, 8, 8)

    def test_zero_texture_finite(self, vae):
        m, lv = vae.encode(torch.zeros(1, 3, 64, 64))
        assert torch.isfinite(m).all() and torch.isfinite(lv).all()

    def test_decode_range(self, vae):
        out = vae.decode(torch.randn(2, 4, 8, 8) * 100)
        assert out.shape == (2, 3, 64, 64)
        assert out.min() >= 0 and out.max() <= 1

    def test_resolution_contract(self, vae):
        with pytest.raises(ParameterError):
            vae.encode(torch.rand(1, 3, 60, 60))
        with pytest.raises(ParameterError):
            vae.decode(torch.rand(1, 3, 8, 8))

    def test_reparameterize_formula(self, vae):
        m = torch.full((1, 4, 8, 8), 2.0)
        lv = torch.full((1, 4, 8, 8), np.log(4.0))
        n = torch.ones(1, 4, 8, 8)
        z = vae.reparameterize(m, lv, n)
        assert torch.allclose(z, torch.full_like(z, 4.0))

    def test_kl_positive_and_zero_at_prior(self, vae):
        m, lv = torch.randn(3, 4, 8, 8), torch.randn(3, 4, 8, 8)
        assert vae.kl(m, lv).item() > 0
        assert abs(vae.kl(torch.zeros(1, 4), torch.zeros(1, 4)).item()) < 1e-12

    def test_logvar_clamped(self, vae):
        with torch.no_grad():
            _, lv = vae.encode(torch.rand(1, 3, 64, 64) * 1e6)
        assert lv.max() <= 20.0 and lv.min() >= -30.0


class TestConditionalUNet2d:
    def test_output_shape(self):
        torch.manual_seed(2)
        net = ConditionalUNet2d()
        z = torch.randn(2, 4, 8, 8)
        y = torch.randn(2, 5, 128)
        for t in (1, 500, 1000):
            out = net(z, torch.zeros_like(z), torch.tensor([t, t]), y)
            assert out.shape == z.shape

    def test_shape_mismatch(self):
        net = ConditionalUNet2d()
        z = torch.randn(1, 4, 8, 8)
        with pytest.raises(ParameterError):
            net(z, torch.randn(1, 4, 4, 4), torch.tensor([1]), torch.randn(1, 3, 128))

    def test_zero_cond_latent_well_defined(self):
        torch.manual_seed(3)
        net = ConditionalUNet2d()
        z = torch.randn(1, 4, 8, 8)
        out = net(z, torch.zeros_like(z), torch.tensor([10]), torch.randn(2, 128))
        assert torch.isfinite(out).all()


class TestIdentityUNet1d:
    def test_shape_roundtrip(self):
        torch.manual_seed(4)
        net = IdentityUNet1d(widths=(8, 8, 8), ctx_dim=16)
        y = torch.randn(3, 16)
        assert net(torch.randn(2, 64), torch.tensor([5, 9]), y).shape == (2, 64)

    def test_pad_and_crop_532(self):
        torch.manual_seed(5)
        net = IdentityUNet1d(widths=(8, 8, 8), ctx_dim=16)
        out = net(torch.randn(532), torch.tensor(7), torch.randn(2, 16))
        assert out.shape == (532,)

    def test_zeroed_cross_attention_ignores_text(self):
        torch.manual_seed(6)
        net = IdentityUNet1d(widths=(8, 8, 8), ctx_dim=16)
        _randomize(net, seed=1)
        with torch.no_grad():
            for m in net.modules():
                if isinstance(m, CrossAttention):
                    for p in m.parameters():
                        p.zero_()
        h = torch.randn(2, 64)
        t = torch.tensor([50, 800])
        a = net(h, t, torch.randn(7, 16))
        b = net(h, t, torch.randn(3, 16) * 10)
        assert torch.equal(a, b)


class TestGradients:
    """Central finite differences vs autograd, 64-bit, 1e-3 relative."""

    def test_time_mlp(self):
        t = torch.tensor([3, 700])
        r = torch.randn(2, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(9))
        _fd_check(TimeMLP(16), lambda m: (m(t) * r).sum())

    def test_resblock2d(self):
        g = torch.Generator().manual_seed(10)
        x = torch.randn(2, 8, 4, 4, dtype=torch.float64, generator=g)
        temb = torch.randn(2, 16, dtype=torch.float64, generator=g)
        r = torch.randn(2, 8, 4, 4, dtype=torch.float64, generator=g)
        _fd_check(ResBlock2d(8, 8, 16), lambda m: (m(x, temb) * r).sum())

    def test_resblock1d(self):
        g = torch.Generator().manual_seed(11)
        x = torch.randn(2, 8, 8, dtype=torch.float64, generator=g)
        temb = torch.randn(2, 16, dtype=torch.float64, generator=g)
        r = torch.randn(2, 8, 8, dtype=torch.float64, generator=g)
        _fd_check(ResBlock1d(8, 8, 16), lambda m: (m(x, temb) * r).sum())

    def test_cross_attention(self):
        g = torch.Generator().manual_seed(12)
        x = torch.randn(2, 8, 4, 4, dtype=torch.float64, generator=g)
        ctx = torch.randn(2, 5, 16, dtype=torch.float64, generator=g)
        r = torch.randn(2, 8, 4, 4, dtype=torch.float64, generator=g)
        _fd_check(CrossAttention(8, 16), lambda m: (m(x, ctx) * r).sum())

    def test_vae(self):
        g = torch.Generator().manual_seed(13)
        x = torch.randn(1, 3, 16, 16, dtype=torch.float64, generator=g).sigmoid()

        def loss(m):
            mean, logvar = m.encode(x)
            recon = m.decode(mean)
            return (recon - x).pow(2).sum() + m.kl(mean, logvar)

        _fd_check(TextureVAE(widths=(8, 8, 8)), loss, n_entries=2)

    def test_unet2d(self):
        g = torch.Generator().manual_seed(14)
        z = torch.randn(1, 4, 8, 8, dtype=torch.float64, generator=g)
        l = torch.randn(1, 4, 8, 8, dtype=torch.float64, generator=g)
        y = torch.randn(1, 3, 16, dtype=torch.float64, generator=g)
        r = torch.randn(1, 4, 8, 8, dtype=torch.float64, generator=g)
        t = torch.tensor([250])
        net = ConditionalUNet2d(widths=(8, 8, 8), ctx_dim=16)
        _fd_check(net, lambda m: (m(z, l, t, y) * r).sum(), n_entries=1)

    def test_idunet(self):
        g = torch.Generator().manual_seed(15)
        h = torch.randn(1, 32, dtype=torch.float64, generator=g)
        y = torch.randn(1, 3, 16, dtype=torch.float64, generator=g)
        r = torch.randn(1, 32, dtype=torch.float64, generator=g)
        t = torch.tensor([777])
        net = IdentityUNet1d(widths=(8, 8, 8), ctx_dim=16, tail_blocks=1)
        _fd_check(net, lambda m: (m(h, t, y) * r).sum(), n_entries=1)


class TestDualEncoder:
    def test_unit_norm_and_similarity_bounds(self):
        torch.manual_seed(7)
        de = DualEncoder(vocab_size())
        img = torch.rand(3, 3, 64, 64)
        ids = torch.randint(0, vocab_size(), (3, 9))
        assert torch.allclose(de.encode_image(img).norm(dim=-1), torch.ones(3), atol=1e-6)
        assert torch.allclose(de.encode_text(ids).norm(dim=-1), torch.ones(3), atol=1e-6)
        s = de.similarity(img, ids)
        assert torch.all(s.abs() <= 1.0 + 1e-6)

    def test_quality_classifier_contract(self):
        torch.manual_seed(8)
        qc = QualityClassifier()
        img = torch.rand(4, 3, 64, 64)
        assert qc(img).shape == (4,)
        s = qc.score(img)
        assert torch.all((s >= 0) & (s <= 1))
