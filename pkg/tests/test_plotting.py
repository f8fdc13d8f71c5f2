import pytest

from momentkit.plotting import render_sweep_figures

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def rows():
    out = []
    for n in (70, 80):
        for k in (16, 32):
            for L in (50, 150):
                v = 0.5 + 0.001 * n + 0.002 * k - 0.0005 * L
                out.append({"N": n, "k": k, "rho": 0.25, "L": L, "strategy": "overall", "R1@0.5": v, "R1@0.7": v - 0.1,
                            "mAP@0.5": v - 0.05, "mAP@0.75": v - 0.2, "mIoU": v - 0.15, "ratio": 0.3 + 0.002 * k})
    return out


def test_figures_written(tmp_path):
    paths = render_sweep_figures(rows(), tmp_path)
    assert {p.name for p in paths} == {"audio_length.png", "frames_keyframes.png", "compression_ratio.png"}
    for p in paths:
        assert p.read_bytes()[:8] == PNG_MAGIC


def test_figures_reproducible(tmp_path):
    a = render_sweep_figures(rows(), tmp_path / "a")
    b = render_sweep_figures(rows(), tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


@pytest.mark.parametrize("fmt", ["svg", "pdf"])
def test_other_formats(tmp_path, fmt):
    paths = render_sweep_figures(rows(), tmp_path, fmt)
    assert all(p.suffix == f".{fmt}" for p in paths)
