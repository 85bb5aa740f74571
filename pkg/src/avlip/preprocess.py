"""Visual front-ends: landmark affine alignment + mouth-ROI cropping for the
lip route, plain resizing for the face route, plus augmentation,
normalization, region-ablation masks and MFCC derivation.

Both routes emit (T, 96, 96), so the encoder never knows which one it is
fed; that geometry contract is what makes the face-vs-lip comparison a
controlled experiment.
"""

from dataclasses import dataclass

import numpy as np

from .synth import reference_landmarks, reference_mouth_center

ROI_SIZE = 96
CROP_SIZE = 88
NORM_MEAN = 0.421
NORM_STD = 0.165


class DegenerateLandmarksError(ValueError):
    """Landmark configuration too degenerate for affine estimation."""


@dataclass
class AffineTransform:
    linear: np.ndarray   # 2x2
    translation: np.ndarray  # (2,)
    residual: float = 0.0

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if abs(np.linalg.det(self.linear)) <= 1e-8:
            raise DegenerateLandmarksError("affine linear part is singular")

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) @ self.linear.T + self.translation

    def inverse(self):
        inv = np.linalg.inv(self.linear)
        return AffineTransform(inv, -inv @ self.translation)


def estimate_affine(landmarks, reference):
    """Least-squares affine A p + t ~= r over the 68 point pairs."""
    p = np.asarray(landmarks, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if p.shape != (68, 2) or r.shape != (68, 2):
        raise ValueError("landmark sets must be (68, 2)")
    if not (np.isfinite(p).all() and np.isfinite(r).all()):
        raise ValueError("landmarks must be finite")
    X = np.concatenate([p, np.ones((68, 1))], axis=1)
    theta, _res, rank, _sv = np.linalg.lstsq(X, r, rcond=None)
    if rank < 3:
        raise DegenerateLandmarksError("landmarks are collinear; affine is underdetermined")
    lin = theta[:2].T
    trans = theta[2]
    residual = float(np.sqrt(((X @ theta - r) ** 2).sum(axis=1).mean()))
    return AffineTransform(lin, trans, residual)


def bilinear_sample(frame, xs, ys):
    """Sample frame (H, W) at float coords (x=col, y=row); out of bounds -> 0."""
    H, W = frame.shape
    f = frame.astype(np.float32, copy=False)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(np.float32)
    fy = (ys - y0).astype(np.float32)

    def at(yy, xx):
        inside = (yy >= 0) & (yy < H) & (xx >= 0) & (xx < W)
        vals = np.zeros(yy.shape, dtype=np.float32)
        vals[inside] = f[yy[inside], xx[inside]]
        return vals

    v00 = at(y0, x0)
    v01 = at(y0, x0 + 1)
    v10 = at(y0 + 1, x0)
    v11 = at(y0 + 1, x0 + 1)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def crop_lip(frame, affine, mouth_center=None):
    """Warp the frame into reference coordinates and crop the 96x96 window
    centered on the reference mouth center (bilinear, out-of-bounds 0)."""
    if mouth_center is None:
        mouth_center = reference_mouth_center()
    cx, cy = int(round(mouth_center[0])), int(round(mouth_center[1]))
    half = ROI_SIZE // 2
    cols = np.arange(cx - half, cx + half, dtype=np.float64)
    rows = np.arange(cy - half, cy + half, dtype=np.float64)
    qx, qy = np.meshgrid(cols, rows)
    inv = affine.inverse()
    sx = inv.linear[0, 0] * qx + inv.linear[0, 1] * qy + inv.translation[0]
    sy = inv.linear[1, 0] * qx + inv.linear[1, 1] * qy + inv.translation[1]
    out = bilinear_sample(frame, sx, sy)
    if frame.dtype == np.uint8:
        return np.clip(np.round(out), 0, 255).astype(np.uint8)
    return out


def face_resize(frame, out_size=ROI_SIZE):
    """Bilinear downscale of a square frame to out_size x out_size."""
    H, W = frame.shape
    if H != W:
        raise ValueError(f"face_resize expects a square frame, got {frame.shape}")
    scale = H / out_size
    coords = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    qx, qy = np.meshgrid(coords, coords)
    out = bilinear_sample(frame, qx, qy)
    if frame.dtype == np.uint8:
        return np.clip(np.round(out), 0, 255).astype(np.uint8)
    return out


def lip_clip(utterance, mouth_center=None):
    """Lip-ROI view of an utterance: per-frame alignment to the reference
    face, then the mouth-centered crop. (T, 96, 96) uint8."""
    ref = reference_landmarks()
    T = utterance.video.shape[0]
    out = np.empty((T, ROI_SIZE, ROI_SIZE), dtype=np.uint8)
    for t in range(T):
        aff = estimate_affine(utterance.landmarks[t], ref)
        out[t] = crop_lip(utterance.video[t], aff, mouth_center)
    return out


def face_clip(utterance):
    """Whole-face view: each frame resized to 96x96. (T, 96, 96) uint8."""
    T = utterance.video.shape[0]
    out = np.empty((T, ROI_SIZE, ROI_SIZE), dtype=np.uint8)
    for t in range(T):
        out[t] = face_resize(utterance.video[t])
    return out


def augment(clip, rng=None, train_mode=False):
    """One random 88x88 crop offset + one flip decision per clip in train
    mode; deterministic center crop, no flip, in eval mode."""
    T, H, W = clip.shape
    margin = H - CROP_SIZE
    if train_mode:
        if rng is None:
            raise ValueError("train-mode augmentation needs an rng stream")
        g = rng.generator()
        r0 = int(g.integers(0, margin + 1))
        c0 = int(g.integers(0, margin + 1))
        flip = bool(g.random() < 0.5)
    else:
        r0 = c0 = margin // 2
        flip = False
    out = clip[:, r0 : r0 + CROP_SIZE, c0 : c0 + CROP_SIZE]
    if flip:
        out = out[:, :, ::-1]
    return np.ascontiguousarray(out)


def normalize(clip):
    """(x/255 - mean)/std with the fixed constants recorded in config."""
    x = clip.astype(np.float32) / 255.0
    return (x - NORM_MEAN) / NORM_STD


def denormalize(clip):
    return (clip * NORM_STD + NORM_MEAN) * 255.0


@dataclass
class RegionMaskSpec:
    """Fractions of the image to zero out: top ("-eye"), bottom ("-neck"),
    and each side ("-side"). Row/column counts are floor(fraction * extent)."""
    top: float = 0.0
    bottom: float = 0.0
    side: float = 0.0

    def __post_init__(self):
        for name, v in (("top", self.top), ("bottom", self.bottom), ("side", self.side)):
            if not 0.0 <= v < 1.0:
                raise ValueError(f"region fraction {name}={v} outside [0, 1)")
        if self.top + self.bottom >= 1.0:
            raise ValueError("top+bottom fractions cover the whole image")
        if 2 * self.side >= 1.0:
            raise ValueError("side fractions cover the whole image")

    def is_empty(self):
        return self.top == 0.0 and self.bottom == 0.0 and self.side == 0.0

    def serialize(self):
        return f"top={self.top:g},bottom={self.bottom:g},side={self.side:g}"

    @staticmethod
    def parse(text):
        vals = {}
        text = text.strip()
        if text in ("", "none"):
            return RegionMaskSpec()
        for part in text.split(","):
            k, _, v = part.partition("=")
            if k.strip() not in ("top", "bottom", "side"):
                raise ValueError(f"unknown region-mask key {k!r}")
            vals[k.strip()] = float(v)
        return RegionMaskSpec(**vals)


def region_mask(clip, spec):
    """Zero the spec'd rows/columns of a (T, H, W) or (H, W) clip."""
    if spec is None or spec.is_empty():
        return clip
    out = np.array(clip, copy=True)
    H, W = out.shape[-2], out.shape[-1]
    n_top = int(np.floor(spec.top * H))
    n_bot = int(np.floor(spec.bottom * H))
    n_side = int(np.floor(spec.side * W))
    if n_top:
        out[..., :n_top, :] = 0
    if n_bot:
        out[..., H - n_bot :, :] = 0
    if n_side:
        out[..., :, :n_side] = 0
        out[..., :, W - n_side :] = 0
    return out


def dct_matrix(n):
    """Orthonormal type-II DCT matrix (n x n)."""
    k = np.arange(n, dtype=np.float64)[:, None]
    c = np.arange(n, dtype=np.float64)[None, :]
    m = np.cos(np.pi * (2 * c + 1) * k / (2 * n))
    m[0] *= np.sqrt(1.0 / n)
    m[1:] *= np.sqrt(2.0 / n)
    return m


def mfcc(audio_features, n_coeffs=13):
    """Type-II DCT of each frame, keeping coefficients 0..n_coeffs-1."""
    audio = np.asarray(audio_features, dtype=np.float64)
    if audio.shape[1] < n_coeffs:
        raise ValueError(f"need at least {n_coeffs} channels, got {audio.shape[1]}")
    m = dct_matrix(audio.shape[1])
    return (audio @ m.T)[:, :n_coeffs].astype(np.float32)
