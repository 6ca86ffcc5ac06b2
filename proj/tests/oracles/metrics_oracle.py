"""Independent reference for mse / ssim / psnr on the 20 metric fixture pairs.

The SSIM here filters whole images with scipy and crops the border, instead of
looping over windows. It is first checked against scikit-image at skimage's own
11-tap window, then evaluated with the 7-tap window the library uses.
Prints C++ initializer rows {mse, ssim, psnr}.
"""
import numpy as np
from scipy import ndimage
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

SHAPES = [(16, 16, 3), (12, 14, 1), (11, 13, 3), (20, 12, 1)]


def pattern(shape, phase):
    h, w, ch = shape
    y, x, c = np.meshgrid(np.arange(h), np.arange(w), np.arange(ch), indexing="ij")
    v = 0.5 + 0.35 * np.sin(0.37 * x + 0.23 * y * (c + 1) + phase) * np.cos(0.11 * (x - y) + 0.5 * c + 0.3 * phase)
    return v.astype(np.float32)


def fixture(k):
    shape = SHAPES[k % 4]
    a = pattern(shape, 0.7 * k)
    h, w, ch = shape
    y, x, c = np.meshgrid(np.arange(h), np.arange(w), np.arange(ch), indexing="ij")
    v = a.astype(np.float64) + (0.02 + 0.01 * k) * np.sin(1.3 * x - 0.7 * y + 2.1 * c + k)
    if k == 19:
        v = 1.0 - a.astype(np.float64)
    return a, np.clip(v, 0.0, 1.0).astype(np.float32)


def ssim(a, b, taps, sigma=1.5, k1=0.01, k2=0.03):
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    r = taps // 2
    g = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    g /= g.sum()
    kernel = np.outer(g, g)
    c1, c2 = k1 ** 2, k2 ** 2
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        f = lambda im: ndimage.correlate(im, kernel, mode="reflect")[r:-r, r:-r]
        mx, my = f(x), f(y)
        vx, vy, cxy = f(x * x) - mx * mx, f(y * y) - my * my, f(x * y) - mx * my
        vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def main():
    for k in range(20):
        a, b = fixture(k)
        a64, b64 = a.astype(np.float64), b.astype(np.float64)
        ref11 = structural_similarity(a64, b64, channel_axis=2, data_range=1.0, gaussian_weights=True,
                                      sigma=1.5, use_sample_covariance=False)
        assert abs(ssim(a, b, 11) - ref11) < 1e-12, (k, ssim(a, b, 11), ref11)
        m = mean_squared_error(a64, b64)
        p = peak_signal_noise_ratio(a64, b64, data_range=1.0)
        assert abs(np.mean((a64 - b64) ** 2) - m) < 1e-15
        print(f"    {{{m:.17g}, {ssim(a, b, 7):.17g}, {p:.17g}}},")


if __name__ == "__main__":
    main()
