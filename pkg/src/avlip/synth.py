"""Procedural talking-face corpus with analytically known landmarks.

Faces are compositions of implicit shapes (ellipses with soft edges)
rendered at 224x224 in grayscale. Head pose is an exact affine per frame,
so stored landmarks are exactly pose(canonical). The mouth tracks a
per-phoneme viseme (aperture/width); the jaw, cheeks and neck carry a
speech-correlated extraoral cue whose amplitude is `cue_strength` -- at 0
the extraoral regions carry no speech information.

Several consonant pairs (b/p, d/t, g/k, m/n, f/v, s/z) share a viseme but
differ in cue code and audio template: words contrasting only in such a
pair are indistinguishable from the lips alone, and distinguishable from
the full face when cue_strength > 0. Audio frames are per-phoneme spectral
templates plus bounded uniform noise, one frame per video frame.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .avt1 import read_avt1, write_avt1
from .rng import RngStream, mix_seed

CANVAS = 224
D_AUDIO = 26
MAX_FRAMES = 375  # 15 s at 25 fps
FACE_CENTER = (112.0, 108.0)
MOUTH_CENTER_OFFSET = (0.0, 38.0)  # relative to face center, at face_scale 1
NECK_TOP = 198  # canvas row where the neck begins (clear of the lip ROI)
NECK_REGION = (slice(198, 224), slice(40, 184))  # rows, cols used by summaries

CUE_OFF = 0.0
CUE_LOW = 0.4
CUE_HIGH = 1.0  # the documented high preset

PROFILE_BOUNDS = {
    "face_scale": (0.88, 1.12),
    "eye_spacing": (22.0, 30.0),
    "mouth_width_base": (22.0, 30.0),
    "jaw_amplitude": (4.0, 9.0),
    "neck_width": (30.0, 46.0),
    "texture_level": (0.0, 1.0),
    "pitch_base": (0.8, 1.25),
}


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    face_scale: float
    eye_spacing: float
    mouth_width_base: float
    jaw_amplitude: float
    neck_width: float
    texture_level: float
    pitch_base: float


@dataclass(frozen=True)
class PoseSpec:
    """Amplitude bounds for the per-utterance smooth pose trajectory."""
    rot_deg: float = 10.0     # |rotation| stays under 15 degrees
    trans_px: float = 8.0
    scale_amp: float = 0.04
    period: float = 40.0

    @staticmethod
    def still():
        return PoseSpec(rot_deg=0.0, trans_px=0.0, scale_amp=0.0)


@dataclass
class Utterance:
    id: str
    video: np.ndarray       # (T, 224, 224) uint8
    audio: np.ndarray       # (T, D_AUDio) float32
    transcript: list
    speaker_id: str
    landmarks: np.ndarray   # (T, 68, 2) float64, canvas pixels
    meta: dict = field(default_factory=dict)  # generator internals for tests/analysis


# -- phoneme inventory ---------------------------------------------------------

# letter -> (aperture, width_code, neck_code, cheek_code)
# paired consonants share (aperture, width) but differ in the cue codes
_SIL = ("-", 0.0, 0.0, 0.0, 0.0)
_PHONE_TABLE = [
    _SIL,
    ("a", 1.00, 0.00, 0.55, 0.30),
    ("b", 0.04, 0.00, 0.90, 0.20),
    ("p", 0.04, 0.00, -0.90, -0.20),
    ("c", 0.20, 0.35, 0.25, -0.45),
    ("d", 0.16, 0.40, 0.80, -0.60),
    ("t", 0.16, 0.40, -0.80, 0.60),
    ("e", 0.62, 0.45, 0.35, 0.10),
    ("f", 0.10, -0.30, 0.00, 1.00),
    ("v", 0.10, -0.30, 0.00, -1.00),
    ("g", 0.32, 0.10, 0.90, -0.90),
    ("k", 0.32, 0.10, -0.90, 0.90),
    ("h", 0.50, 0.10, 0.15, -0.25),
    ("i", 0.35, 0.80, -0.30, 0.35),
    ("j", 0.30, 0.75, 0.45, -0.10),
    ("l", 0.30, 0.50, -0.50, 0.45),
    ("m", 0.05, 0.30, 0.30, 0.90),
    ("n", 0.05, 0.30, -0.30, -0.90),
    ("o", 0.80, -0.70, 0.65, -0.35),
    ("q", 0.14, -0.80, -0.15, 0.20),
    ("r", 0.25, -0.50, 0.40, 0.55),
    ("s", 0.12, 0.60, 1.00, 0.00),
    ("z", 0.12, 0.60, -1.00, 0.00),
    ("u", 0.45, -0.90, -0.60, -0.50),
    ("w", 0.15, -0.85, 0.20, -0.70),
    ("x", 0.16, 0.55, -0.45, 0.75),
    ("y", 0.30, 0.70, 0.70, 0.05),
]

PHONEMES = [row[0] for row in _PHONE_TABLE]
_PHONE_INDEX = {p: i for i, p in enumerate(PHONEMES)}
_APERTURE = np.array([row[1] for row in _PHONE_TABLE])
_WIDTH = np.array([row[2] for row in _PHONE_TABLE])
_NECK_CODE = np.array([row[3] for row in _PHONE_TABLE])
_CHEEK_CODE = np.array([row[4] for row in _PHONE_TABLE])
N_PHONEMES = len(PHONEMES)

FRAMES_PER_PHONE = 3
SIL_FRAMES = 2
AUDIO_NOISE_SIGMA = 0.05

# fixed audio spectral templates (built-in, independent of any corpus seed)
_tpl_rng = np.random.Generator(np.random.Philox(key=np.array([0x5EED_1EAF, 0xA0D10], dtype=np.uint64)))
_MU1 = _tpl_rng.uniform(2.0, 23.0, size=N_PHONEMES)
_MU2 = _tpl_rng.uniform(2.0, 23.0, size=N_PHONEMES)
_AMP = _tpl_rng.uniform(0.8, 1.4, size=N_PHONEMES)
_CH = np.arange(D_AUDIO, dtype=np.float64)
AUDIO_TEMPLATES = (
    _AMP[:, None] * np.exp(-0.5 * ((_CH[None, :] - _MU1[:, None]) / 2.2) ** 2)
    + 0.6 * np.exp(-0.5 * ((_CH[None, :] - _MU2[:, None]) / 3.5) ** 2)
).astype(np.float64)
AUDIO_TEMPLATES[0] *= 0.05  # silence is near-flat


# -- vocabulary ----------------------------------------------------------------

def _build_word_list():
    """100 words; homophene pairs (identical lips, different cue/audio) are
    interleaved with viseme-distinct fillers. The first 20 form the toy vocab."""
    words = [
        "ola", "iwi", "aba", "apa", "ulu", "ehe", "ada", "ata", "ari", "owa",
        "ama", "ana", "ilo", "uha", "aga", "aka", "era", "oji", "alo", "uri",
        "ibi", "ipi", "asa", "aza", "ava", "afa", "idi", "iti", "umu", "unu",
        "ugu", "uku", "ebe", "epe", "ese", "eze", "obo", "opo", "odo", "oto",
        "ele", "oro", "iwa", "uwe", "ohi", "aji", "ilu", "ora", "ehu", "iya",
        "awa", "eli", "iho", "uja", "oye", "ixe", "aqu", "ewi", "oal", "uel",
        "bal", "pol", "dir", "tel", "mur", "nor", "gab", "kol", "fes", "ves",
        "sil", "zul", "hax", "jor", "wib", "yul", "qir", "xan", "cel", "rud",
        "lab", "bem", "pin", "dun", "tor", "mag", "nek", "gol", "kiw", "fay",
        "vox", "sum", "zet", "hul", "jad", "wem", "yos", "qel", "xob", "cir",
    ]
    assert len(words) == len(set(words)) == 100
    return words


WORDS = _build_word_list()


def vocabulary(vocab_size):
    if not 2 <= vocab_size <= len(WORDS):
        raise ValueError(f"vocab_size must be in [2, {len(WORDS)}]")
    return WORDS[:vocab_size]


def word_to_phonemes(word):
    try:
        return [_PHONE_INDEX[ch] for ch in word]
    except KeyError as e:
        raise ValueError(f"word {word!r} contains a letter outside the inventory") from e


# -- speaker generation ----------------------------------------------------------

def generate_speaker(seed, speaker_id=None):
    """Deterministic speaker profile; distinct seeds give distinct profiles."""
    g = RngStream(seed, ("speaker",)).fresh()
    vals = {name: g.uniform(lo, hi) for name, (lo, hi) in PROFILE_BOUNDS.items()}
    return SpeakerProfile(speaker_id=speaker_id or f"spk{seed}", **vals)


REFERENCE_PROFILE = SpeakerProfile(
    speaker_id="reference", face_scale=1.0, eye_spacing=26.0,
    mouth_width_base=26.0, jaw_amplitude=6.0, neck_width=38.0,
    texture_level=0.0, pitch_base=1.0,
)


# -- articulation tracks ----------------------------------------------------------

def phoneme_frames(transcript):
    """Per-frame phoneme index sequence for a word list (with silences)."""
    seq = [0] * SIL_FRAMES
    for w, word in enumerate(transcript):
        if w > 0:
            seq += [0] * SIL_FRAMES
        for ph in word_to_phonemes(word):
            seq += [ph] * FRAMES_PER_PHONE
    seq += [0] * SIL_FRAMES
    return np.array(seq, dtype=np.int64)


_SMOOTH = np.array([0.15, 0.70, 0.15])


def _smooth_track(x):
    padded = np.concatenate([x[:1], x, x[-1:]])
    return np.convolve(padded, _SMOOTH, mode="valid")


# -- implicit-shape rendering ------------------------------------------------------

_GRID_Y, _GRID_X = np.mgrid[0:CANVAS, 0:CANVAS].astype(np.float32)


def _bbox(lin, trans, cx, cy, rx, ry):
    """Canvas-space window enclosing a canonical ellipse under the pose."""
    corners = np.array([[cx - rx, cy - ry], [cx - rx, cy + ry],
                        [cx + rx, cy - ry], [cx + rx, cy + ry]])
    cc = corners @ lin.T + trans
    x0 = max(int(np.floor(cc[:, 0].min())) - 2, 0)
    x1 = min(int(np.ceil(cc[:, 0].max())) + 3, CANVAS)
    y0 = max(int(np.floor(cc[:, 1].min())) - 2, 0)
    y1 = min(int(np.ceil(cc[:, 1].max())) + 3, CANVAS)
    return slice(y0, y1), slice(x0, x1)


def _paint(img, cov, value):
    img *= 1.0 - cov
    img += cov * value


def _paint_ellipse(img, xg, yg, pose, cx, cy, rx, ry, value, sharp=2.0):
    sl = _bbox(pose[0], pose[1], cx, cy, rx, ry)
    x, y = xg[sl], yg[sl]
    q = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2
    cov = np.clip((1.0 - q) * (sharp * 0.5 * max(rx, ry)), 0.0, 1.0)
    _paint(img[sl], cov, value)


def render_clip(profile, phones, aperture, width, cue_strength, poses, texture_seed=0):
    """Render the clip frame by frame. poses: list of (lin 2x2, trans 2),
    mapping canonical -> canvas coordinates."""
    T = len(phones)
    cx, cy = FACE_CENTER
    fs = profile.face_scale
    rx, ry = 64.0 * fs, 78.0 * fs
    es = profile.eye_spacing * fs
    mcx = cx + MOUTH_CENTER_OFFSET[0] * fs
    mcy = cy + MOUTH_CENTER_OFFSET[1] * fs

    if profile.texture_level > 0:
        g = RngStream(texture_seed, ("texture", profile.speaker_id)).fresh()
        gx_, gy_ = g.uniform(-1, 1, 2)
    if profile.texture_level > 0.15:
        g = RngStream(texture_seed, ("dot", profile.speaker_id)).fresh()
        dotx = cx + g.uniform(-30, 30)
        doty = 78.0 + g.uniform(-8, 8)

    out = np.empty((T, CANVAS, CANVAS), dtype=np.uint8)
    for t in range(T):
        lin, trans = poses[t]
        inv = np.linalg.inv(lin).astype(np.float32)
        dx = _GRID_X - np.float32(trans[0])
        dy = _GRID_Y - np.float32(trans[1])
        xg = inv[0, 0] * dx + inv[0, 1] * dy
        yg = inv[1, 0] * dx + inv[1, 1] * dy
        pose = (lin, trans)

        jaw_ext = profile.jaw_amplitude * fs * float(aperture[t])
        mouth_hw = profile.mouth_width_base * 0.75 * (1.0 + 0.25 * float(width[t])) * fs
        mouth_hh = (2.5 + 10.0 * float(aperture[t])) * fs
        neck_hw = profile.neck_width * (1.0 + 0.35 * cue_strength * _NECK_CODE[phones[t]])
        cheek_off = 64.0 * fs + 10.0 + 6.0 * cue_strength * _CHEEK_CODE[phones[t]]

        img = np.full((CANVAS, CANVAS), 0.08, dtype=np.float32)

        # neck (drawn first; the head overlaps its top)
        nsl = _bbox(lin, trans, cx, (NECK_TOP + CANVAS) / 2, neck_hw + 2, (CANVAS - NECK_TOP) / 2 + 2)
        neck = (np.clip((neck_hw - np.abs(xg[nsl] - cx)) * 0.8, 0, 1)
                * np.clip((yg[nsl] - NECK_TOP) * 0.8 + 1.0, 0, 1))
        _paint(img[nsl], neck, 0.50)

        # cheek markers, clear of the lip ROI on both sides
        for side in (-1.0, 1.0):
            _paint_ellipse(img, xg, yg, pose, cx + side * cheek_off, 132.0, 7.0 * fs, 8.5 * fs, 0.46)

        # head: upper ellipse + jaw-extended lower half
        hsl = _bbox(lin, trans, cx, cy, rx, ry + jaw_ext)
        hx, hy = xg[hsl], yg[hsl]
        qu = ((hx - cx) / rx) ** 2 + ((hy - cy) / ry) ** 2
        ql = ((hx - cx) / rx) ** 2 + ((hy - cy) / (ry + jaw_ext)) ** 2
        q = np.where(hy >= cy, ql, qu)
        head = np.clip((1.0 - q) * ry, 0.0, 1.0)
        if profile.texture_level > 0:
            tone = 0.55 + 0.10 * profile.texture_level * (gx_ * (hx - cx) / 112.0 + gy_ * (hy - cy) / 112.0)
        else:
            tone = 0.55
        _paint(img[hsl], head, tone)

        # forehead identity dot (outside the lip ROI)
        if profile.texture_level > 0.15:
            _paint_ellipse(img, xg, yg, pose, dotx, doty, 3.0, 3.0, 0.30)

        for side in (-1.0, 1.0):
            ex = cx + side * es
            _paint_ellipse(img, xg, yg, pose, ex, cy - 63.0 * fs, 9.0 * fs, 2.0 * fs, 0.25)  # brow
            _paint_ellipse(img, xg, yg, pose, ex, cy - 50.0 * fs, 7.0 * fs, 4.0 * fs, 0.15)  # eye
            _paint_ellipse(img, xg, yg, pose, ex, cy - 50.0 * fs, 2.2 * fs, 2.2 * fs, 0.05)  # pupil

        _paint_ellipse(img, xg, yg, pose, cx, cy - 6.0 * fs, 5.0 * fs, 10.0 * fs, 0.48)  # nose

        _paint_ellipse(img, xg, yg, pose, mcx, mcy, mouth_hw, mouth_hh, 0.33)  # lips
        inner_hh = mouth_hh - 2.5 * fs
        if inner_hh > 0.5:
            _paint_ellipse(img, xg, yg, pose, mcx, mcy, 0.65 * mouth_hw, inner_hh, 0.04)  # open mouth

        np.clip(np.round(img * 255.0), 0, 255, out=img)
        out[t] = img.astype(np.uint8)
    return out


# -- landmarks ----------------------------------------------------------------------

def canonical_landmarks(profile, phone_idx, aperture, width):
    """68 analytic keypoints in canonical (pose-free) coordinates."""
    cx, cy = FACE_CENTER
    fs = profile.face_scale
    jaw_ext = profile.jaw_amplitude * fs * aperture
    mouth_hw = profile.mouth_width_base * 0.75 * (1.0 + 0.25 * width) * fs
    mouth_hh = (2.5 + 10.0 * aperture) * fs
    rx, ry = 64.0 * fs, 78.0 * fs
    pts = np.zeros((68, 2), dtype=np.float64)

    theta = np.deg2rad(170.0 - 160.0 * np.arange(17) / 16.0)
    pts[0:17, 0] = cx + rx * np.cos(theta)
    pts[0:17, 1] = cy + (ry + jaw_ext) * np.sin(theta)

    es = profile.eye_spacing * fs
    for k, side in ((17, -1.0), (22, 1.0)):
        off = np.linspace(-9.0, 9.0, 5) * fs
        pts[k:k + 5, 0] = cx + side * es + off
        pts[k:k + 5, 1] = cy - 63.0 * fs - 1.5 * fs * np.cos(np.linspace(-1, 1, 5))

    pts[27:31, 0] = cx
    pts[27:31, 1] = cy + np.linspace(-26.0, -2.0, 4) * fs
    base_x = np.array([-8.0, -4.0, 0.0, 4.0, 8.0]) * fs
    pts[31:36, 0] = cx + base_x
    pts[31:36, 1] = cy + np.array([2.0, 4.0, 5.0, 4.0, 2.0]) * fs

    for k, side in ((36, -1.0), (42, 1.0)):
        ang = np.deg2rad(np.arange(6) * 60.0)
        pts[k:k + 6, 0] = cx + side * es + 7.0 * fs * np.cos(ang)
        pts[k:k + 6, 1] = cy - 50.0 * fs + 4.0 * fs * np.sin(ang)

    mcx = cx + MOUTH_CENTER_OFFSET[0] * fs
    mcy = cy + MOUTH_CENTER_OFFSET[1] * fs
    ang = np.deg2rad(180.0 + np.arange(12) * 30.0)
    pts[48:60, 0] = mcx + mouth_hw * np.cos(ang)
    pts[48:60, 1] = mcy + mouth_hh * np.sin(ang)
    ang = np.deg2rad(180.0 + np.arange(8) * 45.0)
    pts[60:68, 0] = mcx + 0.65 * mouth_hw * np.cos(ang)
    pts[60:68, 1] = mcy + max(mouth_hh - 2.5 * fs, 0.8) * np.sin(ang)
    return pts


def reference_landmarks():
    """Canonical landmarks of the fixed reference face (neutral articulation)."""
    return canonical_landmarks(REFERENCE_PROFILE, 0, 0.2, 0.0)


def reference_mouth_center():
    ref = reference_landmarks()
    return ref[48:68].mean(axis=0)


# -- pose ---------------------------------------------------------------------------

def _sample_pose_params(spec, rng):
    g = rng.fresh()
    return {
        "rot0": g.uniform(-spec.rot_deg / 3, spec.rot_deg / 3),
        "rot_amp": g.uniform(0, spec.rot_deg * 2 / 3),
        "rot_phase": g.uniform(0, 2 * np.pi),
        "tx_amp": g.uniform(0, spec.trans_px),
        "tx_phase": g.uniform(0, 2 * np.pi),
        "ty_amp": g.uniform(0, spec.trans_px),
        "ty_phase": g.uniform(0, 2 * np.pi),
        "scale_amp": g.uniform(0, spec.scale_amp),
        "scale_phase": g.uniform(0, 2 * np.pi),
        "period": spec.period,
    }


def pose_affine(params, t):
    """(linear 2x2, translation 2) for frame t; canonical -> canvas."""
    w = 2 * np.pi * t / max(params["period"], 1.0)
    theta = np.deg2rad(params["rot0"] + params["rot_amp"] * np.sin(w + params["rot_phase"]))
    s = 1.0 + params["scale_amp"] * np.sin(w + params["scale_phase"])
    tx = params["tx_amp"] * np.sin(w + params["tx_phase"])
    ty = params["ty_amp"] * np.sin(w + params["ty_phase"])
    c, si = np.cos(theta), np.sin(theta)
    lin = s * np.array([[c, -si], [si, c]])
    center = np.array(FACE_CENTER)
    trans = center - lin @ center + np.array([tx, ty])
    return lin, trans


# -- utterance / corpus --------------------------------------------------------------

def generate_utterance(profile, transcript, pose_spec, seed, cue_strength=CUE_HIGH, utt_id=None):
    """Render a full utterance; bit-identical for identical arguments."""
    if not transcript:
        raise ValueError("transcript must be non-empty")
    phones = phoneme_frames(list(transcript))
    T = len(phones)
    if T > MAX_FRAMES:
        raise ValueError(f"utterance has {T} frames, exceeding the {MAX_FRAMES}-frame cap")

    rng = RngStream(seed, ("utt",))
    pose_params = _sample_pose_params(pose_spec, rng.split("pose"))
    jit = rng.split("aperture").fresh().uniform(-0.03, 0.03, size=T)
    aperture = np.clip(_smooth_track(_APERTURE[phones]) + jit, 0.0, 1.0)
    width = _smooth_track(_WIDTH[phones])

    landmarks = np.empty((T, 68, 2), dtype=np.float64)
    canon = np.empty((T, 68, 2), dtype=np.float64)
    poses = []
    for t in range(T):
        lin, trans = pose_affine(pose_params, t)
        canon[t] = canonical_landmarks(profile, int(phones[t]), aperture[t], width[t])
        landmarks[t] = canon[t] @ lin.T + trans
        poses.append((lin, trans))
    video = render_clip(profile, phones, aperture, width, cue_strength, poses, texture_seed=0)

    noise = rng.split("audio").fresh().uniform(-AUDIO_NOISE_SIGMA, AUDIO_NOISE_SIGMA, size=(T, D_AUDIO))
    pitch = profile.pitch_base
    audio = (AUDIO_TEMPLATES[phones] * (1.0 + 0.3 * (pitch - 1.0))
             + 0.15 * pitch * (_CH[None, :] / D_AUDIO) + noise)

    return Utterance(
        id=utt_id or f"{profile.speaker_id}_u{seed}",
        video=video,
        audio=audio.astype(np.float32),
        transcript=list(transcript),
        speaker_id=profile.speaker_id,
        landmarks=landmarks,
        meta={
            "phones": phones,
            "aperture": aperture,
            "aperture_code": _APERTURE[phones],
            "width": width,
            "poses": poses,
            "canonical_landmarks": canon,
            "cue_strength": cue_strength,
        },
    )


@dataclass
class CorpusConfig:
    num_speakers: int = 4
    utterances_per_speaker: int = 50
    vocab_size: int = 20
    cue_strength: float = CUE_HIGH
    seed: int = 0
    words_min: int = 3
    words_max: int = 5
    pose: PoseSpec = field(default_factory=PoseSpec)
    valid_fraction: float = 0.1


@dataclass(frozen=True)
class ManifestRecord:
    utterance_id: str
    video_path: str
    audio_path: str
    transcript: str
    speaker_id: str
    split: str


@dataclass
class CorpusManifest:
    base_dir: str
    records: list

    def by_split(self, split):
        return [r for r in self.records if r.split == split]

    def speakers(self, split=None):
        rows = self.records if split is None else self.by_split(split)
        return sorted({r.speaker_id for r in rows})


MANIFEST_NAME = "manifest.tsv"


def _plan_corpus(cfg):
    """Deterministic record plan: (utt_id, speaker index, transcript, seed, split)."""
    if cfg.vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    if cfg.num_speakers < 2:
        raise ValueError("num_speakers must be >= 2")
    vocab = vocabulary(cfg.vocab_size)
    n_test = max(1, cfg.num_speakers // 4)
    plan = []
    idx = 0
    for s in range(cfg.num_speakers):
        speaker_id = f"spk{s:02d}"
        is_test = s >= cfg.num_speakers - n_test
        for u in range(cfg.utterances_per_speaker):
            useed = mix_seed(cfg.seed, idx)
            g = RngStream(useed, ("transcript",)).fresh()
            n_words = int(g.integers(cfg.words_min, cfg.words_max + 1))
            words = [vocab[int(g.integers(0, len(vocab)))] for _ in range(n_words)]
            if is_test:
                split = "test"
            else:
                split = "valid" if g.random() < cfg.valid_fraction else "train"
            plan.append((f"{speaker_id}_{u:04d}", s, words, useed, split))
            idx += 1
    return plan


def _render_record(args):
    cfg, profile, utt_id, words, useed = args
    return generate_utterance(profile, words, cfg.pose, useed,
                              cue_strength=cfg.cue_strength, utt_id=utt_id)


def generate_corpus(cfg, out_dir, threads=1):
    """Write AVT1 tensors + manifest; speaker-disjoint test split."""
    os.makedirs(out_dir, exist_ok=True)
    profiles = [generate_speaker(mix_seed(cfg.seed, 10_000_000 + s), speaker_id=f"spk{s:02d}")
                for s in range(cfg.num_speakers)]
    plan = _plan_corpus(cfg)
    jobs = [(cfg, profiles[s], utt_id, words, useed) for utt_id, s, words, useed, _ in plan]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            utts = list(pool.map(_render_record, jobs))
    else:
        utts = [_render_record(j) for j in jobs]

    records = []
    for (utt_id, _s, words, _useed, split), utt in zip(plan, utts):
        vpath = f"{utt_id}.video.avt1"
        apath = f"{utt_id}.audio.avt1"
        write_avt1(os.path.join(out_dir, vpath), utt.video)
        write_avt1(os.path.join(out_dir, apath), utt.audio)
        write_avt1(os.path.join(out_dir, landmarks_path_for(vpath, absolute=False, base=out_dir)), utt.landmarks)
        records.append(ManifestRecord(utt_id, vpath, apath, " ".join(words), utt.speaker_id, split))

    manifest = CorpusManifest(base_dir=str(out_dir), records=records)
    save_manifest(manifest)
    return manifest


def landmarks_path_for(video_path, absolute=True, base=None):
    """Landmarks sit next to the video file: <id>.landmarks.avt1."""
    p = video_path[: -len(".video.avt1")] + ".landmarks.avt1" if video_path.endswith(".video.avt1") \
        else video_path + ".landmarks.avt1"
    return os.path.join(base, p) if (absolute and base) else p


def save_manifest(manifest):
    lines = []
    for r in manifest.records:
        lines.append("\t".join([r.utterance_id, r.video_path, r.audio_path,
                                r.transcript, r.speaker_id, r.split]))
    with open(os.path.join(manifest.base_dir, MANIFEST_NAME), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_manifest(base_dir):
    path = os.path.join(base_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no manifest at {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"malformed manifest line: {line!r}")
            records.append(ManifestRecord(*parts))
    ids = [r.utterance_id for r in records]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate utterance ids in manifest")
    m = CorpusManifest(base_dir=str(base_dir), records=records)
    train_sp = set(m.speakers("train")) | set(m.speakers("valid"))
    if train_sp & set(m.speakers("test")):
        raise ValueError("test-split speakers overlap the train split")
    return m


def load_record(manifest, record):
    video = read_avt1(os.path.join(manifest.base_dir, record.video_path))
    audio = read_avt1(os.path.join(manifest.base_dir, record.audio_path))
    lpath = landmarks_path_for(record.video_path, absolute=True, base=manifest.base_dir)
    landmarks = read_avt1(lpath)
    return Utterance(
        id=record.utterance_id, video=video, audio=audio,
        transcript=record.transcript.split(), speaker_id=record.speaker_id,
        landmarks=landmarks,
    )


def neck_temporal_variance(cue_strength, transcript=("aba", "ulu")):
    """Temporal pixel variance in the neck region of a pose-frozen probe
    utterance (the gen-data summary number; 0 when the cue is off)."""
    utt = generate_utterance(REFERENCE_PROFILE, list(transcript), PoseSpec.still(),
                             seed=1234, cue_strength=cue_strength)
    region = utt.video[:, NECK_REGION[0], NECK_REGION[1]].astype(np.float64)
    return float(region.var(axis=0).mean())
