"""Batch pipelines over frame datasets: PERCLOS, saccades, spectacles, ROC and model training."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cascade, eog, eyestate, iris, metrics, reports, resources, subspace
from .config import RunConfig
from .dataset import FrameDataset, TruthRow
from .enhance import bhe
from .imgcore import ImageSizeError, Rect, as_gray, resize_bicubic
from .spectacles import detect_spectacles
from .track import BoxConstraint, TrackLost, track_iris


class InputError(ValueError):
    pass


MODEL_FILES = {
    "face": "face_cascade.txt",
    "eye": "eye_subspace.txt",
    "svm": "eye_svm.txt",
    "lbp": "eye_lbp.txt",
    "svm_lbp": "eye_svm_lbp.txt",
}
_LOADERS = {"face": cascade.load, "eye": subspace.load, "svm": eyestate.load, "lbp": subspace.load,
            "svm_lbp": eyestate.load}


def _model_path(name: str, directory) -> Path:
    if directory is not None:
        p = Path(directory) / MODEL_FILES[name]
        if p.exists():
            return p
    return resources.bundled_path(MODEL_FILES[name])


def load_model(name: str, directory=None):
    """A model from ``directory`` if present there, else the bundled one."""
    return _LOADERS[name](_model_path(name, directory))


def _log(msg: str, quiet: bool) -> None:
    if not quiet:
        print(msg, flush=True)


# ---------------------------------------------------------------------------
# PERCLOS

FRAME_COLUMNS = ("frame", "status", "enhanced", "theta", "face_x", "face_y", "face_w", "face_h",
                 "eye_x", "eye_y", "eye_w", "eye_h", "e_min", "state", "score", "error")
PERCLOS_COLUMNS = ("minute", "perclos", "closed", "known", "flag")


@dataclass(frozen=True)
class FrameResult:
    frame: int
    status: str  # ok, no_face or error
    state: str
    enhanced: bool = False
    theta: float | None = None
    face: Rect | None = None
    eye: Rect | None = None
    e_min: float | None = None
    score: float | None = None
    error: str = ""

    def row(self):
        def box(r):
            return (None,) * 4 if r is None else (r.x, r.y, r.w, r.h)
        return (self.frame, self.status, self.enhanced, self.theta, *box(self.face), *box(self.eye),
                self.e_min, self.state, self.score, self.error)


@dataclass
class EyeModels:
    face: cascade.CascadeModel
    subspace: subspace.SubspaceModel  # eye locator (pixel eigen-eyes)
    features: subspace.SubspaceModel  # projection used for the classifier
    clf: eyestate.KernelClassifier
    mode: str

    @classmethod
    def load(cls, directory=None, mode: str = "pixels") -> "EyeModels":
        eye = load_model("eye", directory)
        if mode == "lbp":
            return cls(load_model("face", directory), eye, load_model("lbp", directory),
                       load_model("svm_lbp", directory), mode)
        return cls(load_model("face", directory), eye, eye, load_model("svm", directory), mode)


def process_frame(k: int, img: np.ndarray, models: EyeModels, cfg: RunConfig) -> FrameResult:
    """Face, then eye, then eye state; the face search is retried on the BHE frame."""
    kw = dict(sf=cfg.sf, step=cfg.step, min_neighbors=cfg.min_neighbors)
    img = as_gray(img)
    try:
        res = cascade.detect_with_rotation(img, models.face, **kw)
        enhanced = False
        if res is None:
            res = cascade.detect_with_rotation(bhe(img), models.face, **kw)
            enhanced = True
        if res is None:
            return FrameResult(k, "no_face", eyestate.UNKNOWN, enhanced)
        roi = res.roi.crop(res.frame)
        hit = subspace.subspace_detect(roi, models.subspace, **subspace.EYE_MODE)
        eye = Rect(res.roi.x + hit.rect.x, res.roi.y + hit.rect.y, hit.rect.w, hit.rect.h)
        state, score = eyestate.eye_state(eye.crop(res.frame), models.features, models.clf, models.mode)
    except ImageSizeError as exc:
        return FrameResult(k, "error", eyestate.UNKNOWN, error=f"ImageSizeError: {exc}")
    return FrameResult(k, "ok", state, enhanced, res.theta, res.face.rect, eye, hit.e_min, score)


@dataclass
class PerclosRun:
    frames: list[FrameResult]
    windows: list[eyestate.PerclosRow]
    fps: float
    seconds: float

    @property
    def final(self) -> eyestate.PerclosRow | None:
        return self.windows[-1] if self.windows else None


def run_perclos(ds: FrameDataset, cfg: RunConfig, out, models: EyeModels | None = None,
                quiet: bool = False) -> PerclosRun:
    """Writes ``frames.csv`` and ``perclos.csv`` into ``out``; timing goes to stdout only."""
    out = Path(out)
    models = models or EyeModels.load(None, cfg.features)
    fps = cfg.fps or ds.fps
    results = []
    t0 = time.perf_counter()
    for k, img, err in ds:
        if img is None:
            results.append(FrameResult(k, "error", eyestate.UNKNOWN, error=err))
        else:
            results.append(process_frame(k, img, models, cfg))
    dt = time.perf_counter() - t0
    windows = eyestate.perclos([r.state for r in results], fps, cfg.window_s, cfg.stride_s)
    reports.write_csv(out / "frames.csv", FRAME_COLUMNS, [r.row() for r in results])
    reports.write_csv(out / "perclos.csv", PERCLOS_COLUMNS,
                      [(w.minute, w.value, w.closed, w.known, w.flag) for w in windows])
    n = len(results)
    _log(f"perclos: {n} frames in {dt:.2f} s ({n / dt if dt > 0 else 0:.1f} frames/s), "
         f"{sum(r.status == 'ok' for r in results)} faces", quiet)
    return PerclosRun(results, windows, fps, dt)


# ---------------------------------------------------------------------------
# saccades

SACCADE_COLUMNS = ("segment", "onset", "offset", "amplitude", "peak_velocity", "duration", "sr")
TRACK_COLUMNS = ("frame", "segment", "px", "py", "vx", "vy", "theta", "measured", "constrained")
SEGMENT_COLUMNS = ("segment", "start", "end", "reason")


@dataclass(frozen=True)
class Saccade:
    segment: int
    record: iris.SaccadeRecord  # onset/offset are dataset frame indices


@dataclass
class SaccadeRun:
    saccades: list[Saccade]
    fps: float
    segments: list[tuple[int, int, int, str]]
    track_rows: list[tuple]


def _segment_saccades(theta: np.ndarray, first: int, fps: float, cfg: RunConfig) -> list[iris.SaccadeRecord]:
    if len(theta) < 2:
        return []
    v = np.abs(iris.velocities(theta, fps))
    thresh = max(cfg.saccade_frac * v.max(), cfg.saccade_min_velocity)
    out = []
    for r in iris.saccade_params(theta, fps, v_thresh=thresh):
        if abs(r.amplitude) >= cfg.saccade_min_amplitude:
            out.append(iris.SaccadeRecord(r.onset + first, r.offset + first, r.amplitude, r.peak_velocity,
                                          r.duration, r.sr))
    return out


def run_saccade(ds: FrameDataset, cfg: RunConfig, out, eog_path=None, quiet: bool = False) -> SaccadeRun:
    """Track the iris through the clip, measure saccades per track segment, optionally compare with EOG."""
    out = Path(out)
    fps = cfg.fps or ds.fps
    frames = [img for _, img, _ in ds]
    icfg = cfg.iris()

    def detect(img):
        if img is None:
            raise iris.LocalizationError("unreadable frame")
        return iris.iris_center(img, icfg)

    saccades: list[Saccade] = []
    segments = []
    track_rows = []
    corners = None
    start, seg = 0, 0
    while start < len(frames):
        part = frames[start:]
        h = next((f.shape[0] for f in part if f is not None), 0)
        constraint = None
        # corners are refreshed on the first readable frame of every segment
        for f in part:
            if f is None:
                continue
            try:
                corners = iris.eye_corners(f, eye_side=cfg.eye_side)
            except iris.LocalizationError:
                pass
            break
        if corners is not None and cfg.constrain:
            xs = sorted((corners.nasal[0], corners.temporal[0]))
            constraint = BoxConstraint.positions(xs, (0, h), margin=2.0)
        try:
            pts = track_iris(part, detect, cfg.track(fps), constraint)
            lost = None
        except TrackLost as exc:
            pts, lost = exc.points, start + exc.frame
        end = start + len(pts) - 1
        segments.append((seg, start, end, "end" if lost is None else "lost"))
        valid = [p for p in pts if np.isfinite(p.px)]
        theta = np.array([iris.relative_position(p.px, corners) for p in valid]) if corners and valid else np.array([])
        th_by_frame = dict(zip((p.frame for p in valid), theta))
        for p in pts:
            track_rows.append((start + p.frame, seg, p.px, p.py, p.vx, p.vy, th_by_frame.get(p.frame),
                               p.measured, p.constrained))
        if len(theta):
            saccades += [Saccade(seg, r) for r in _segment_saccades(theta, start + valid[0].frame, fps, cfg)]
        if lost is None:
            break
        start, seg = lost, seg + 1
    reports.write_csv(out / "saccades.csv", SACCADE_COLUMNS,
                      [(s.segment, s.record.onset, s.record.offset, s.record.amplitude, s.record.peak_velocity,
                        s.record.duration, s.record.sr) for s in saccades])
    reports.write_csv(out / "track.csv", TRACK_COLUMNS, track_rows)
    reports.write_csv(out / "segments.csv", SEGMENT_COLUMNS, segments)
    run = SaccadeRun(saccades, fps, segments, track_rows)
    _log(f"saccade: {len(frames)} frames, {len(segments)} segment(s), {len(saccades)} saccade(s)", quiet)
    if eog_path is not None:
        samples, rate = eog.read_csv(eog_path)
        pairs = match_eog(samples, rate, saccades, fps, cfg)
        rows, summary = correlation_report(pairs)
        reports.write_csv(out / "correlation.csv", ("saccade", "parameter", "eog_value", "video_value"), rows)
        reports.write_csv(out / "correlation_summary.csv", ("parameter", "pearson", "pairs"), summary)
        for p, r, n in summary:
            _log(f"  {p}: r = {'undefined' if r is None else f'{r:.4f}'} over {n} pairs", quiet)
    return run


def _per_unit(values) -> np.ndarray:
    v = np.abs(np.asarray(values, dtype=np.float64))
    top = v.max() if v.size else 0.0
    return v / top if top > 0 else v


def match_eog(samples, rate: float, saccades: list[Saccade], fps: float, cfg: RunConfig,
              tol: float = 0.1) -> list[tuple[int, float, float, float, float]]:
    """Pair every video saccade with the EOG peak whose start is nearest in time (within ``tol`` s).

    Returns ``(index, eog_amp, video_amp, eog_vel, video_vel)`` with every
    parameter in per-unit terms (divided by its largest magnitude).
    """
    peaks = eog.isolate_peaks(eog.condition(samples, rate, cfg.saccade_frac, cfg.eog_f_lo, cfg.eog_f_hi))
    if not peaks or not saccades:
        return []
    starts = np.array([p.start / rate for p in peaks])
    e_amp, e_vel = _per_unit([p.amplitude for p in peaks]), _per_unit([p.peak_velocity for p in peaks])
    v_amp = _per_unit([s.record.amplitude for s in saccades])
    v_vel = _per_unit([s.record.peak_velocity for s in saccades])
    out = []
    for i, s in enumerate(saccades):
        d = np.abs(starts - s.record.onset / fps)
        j = int(np.argmin(d))
        if d[j] <= tol:
            out.append((i, float(e_amp[j]), float(v_amp[i]), float(e_vel[j]), float(v_vel[i])))
    return out


def correlation_report(pairs) -> tuple[list[tuple], list[tuple]]:
    """Per-saccade rows and per-parameter Pearson r (None with fewer than two pairs or no spread)."""
    rows = []
    for i, ea, va, ev, vv in pairs:
        rows.append((i, "amplitude", ea, va))
        rows.append((i, "peak_velocity", ev, vv))
    summary = []
    for name, a, b in (("amplitude", 1, 2), ("peak_velocity", 3, 4)):
        x = [p[a] for p in pairs]
        y = [p[b] for p in pairs]
        try:
            r = eog.pearson(x, y)
        except (ValueError, ZeroDivisionError):
            r = None
        summary.append((name, r, len(pairs)))
    return rows, summary


# ---------------------------------------------------------------------------
# spectacles

SPECTACLE_COLUMNS = ("frame", "D", "detected", "largest_component", "second_component", "error")


def run_spectacles(ds: FrameDataset, cfg: RunConfig, out, quiet: bool = False) -> list[tuple]:
    """One row per frame; the ground-truth face box is used as the face crop when present."""
    faces = {}
    if ds.truth is not None:
        faces = {r.frame: r.face for r in ds.ground_truth() if r.face is not None}
    scfg = cfg.spectacles()
    rows = []
    for k, img, err in ds:
        if img is None:
            rows.append((k, None, None, None, None, err))
            continue
        face = faces[k].crop(img) if k in faces else img
        try:
            r = detect_spectacles(face, scfg)
        except ImageSizeError as exc:
            rows.append((k, None, None, None, None, f"ImageSizeError: {exc}"))
            continue
        rows.append((k, r.D, r.detected, r.largest, r.second, ""))
    reports.write_csv(Path(out) / "spectacles.csv", SPECTACLE_COLUMNS, rows)
    _log(f"spectacles: {sum(bool(r[2]) for r in rows)} of {len(rows)} frames with spectacles", quiet)
    return rows


# ---------------------------------------------------------------------------
# ROC

def read_scores(path) -> tuple[np.ndarray, np.ndarray]:
    head, rows = reports.read_csv(path)
    head = [h.strip() for h in head]
    if "score" not in head or "label" not in head:
        raise InputError(f"{path}: need 'score' and 'label' columns")
    i, j = head.index("score"), head.index("label")
    try:
        s = np.array([float(r[i]) for r in rows if r])
        y = np.array([int(r[j]) for r in rows if r])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return s, y


def run_roc(scores_path, out, quiet: bool = False) -> float:
    s, y = read_scores(scores_path)
    try:
        pts = metrics.roc_points(s, y)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    area = metrics.auc(pts)
    reports.write_csv(Path(out) / "roc.csv", ("threshold", "tpr", "fpr"), [(p.threshold, p.tpr, p.fpr) for p in pts])
    reports.write_csv(Path(out) / "auc.csv", ("auc", "positives", "negatives"),
                      [(area, int(y.sum()), int(len(y) - y.sum()))])
    _log(f"roc: {len(pts)} points, AUC = {float(area):.6f}", quiet)
    return float(area)


# ---------------------------------------------------------------------------
# training

TRAIN_MODES = ("cascade", "subspace", "lbp", "svm")
MIN_PER_CLASS = 10


def _split(idx: np.ndarray, rng: np.random.Generator, frac: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train / held-out split of one class."""
    idx = rng.permutation(idx)
    n_test = int(round(frac * len(idx)))
    return np.sort(idx[n_test:]), np.sort(idx[:n_test])


def _labelled(ds: FrameDataset) -> tuple[list[np.ndarray], list[TruthRow]]:
    if ds.truth is None:
        raise InputError("training needs a dataset with ground truth")
    truth = {r.frame: r for r in ds.ground_truth()}
    imgs, rows = [], []
    for k, img, err in ds:
        if img is None or k not in truth:
            continue
        imgs.append(img)
        rows.append(truth[k])
    return imgs, rows


def _need(n: int, what: str) -> None:
    if n < MIN_PER_CLASS:
        raise InputError(f"need at least {MIN_PER_CLASS} {what}, got {n}")


def _rank(k: int, n: int) -> int:
    """Subspace size, capped by what ``n`` training vectors can span about their mean."""
    return min(k, n - 1)


def _eye_patch(img: np.ndarray) -> np.ndarray:
    img = as_gray(img)
    if img.shape != (eyestate.EYE_H, eyestate.EYE_W):
        img = resize_bicubic(img, eyestate.EYE_W, eyestate.EYE_H)
    return img


def train_models(ds: FrameDataset, mode: str, cfg: RunConfig, out, quiet: bool = False) -> dict:
    """Train one model family, write it into ``out`` and return the held-out metrics.

    cascade: frames are base-size windows, a face box marks a positive.
    subspace / lbp: frames are eye-sized crops, an eye box marks an eye.
    svm: eye crops labelled open or closed.
    """
    if mode not in TRAIN_MODES:
        raise InputError(f"mode must be one of {', '.join(TRAIN_MODES)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    imgs, rows = _labelled(ds)
    if mode == "cascade":
        res = _train_cascade(imgs, rows, rng, cfg, out)
    elif mode in ("subspace", "lbp"):
        res = _train_subspace(imgs, rows, rng, mode, out)
    else:
        res = _train_svm(imgs, rows, rng, cfg, out)
    reports.write_csv(out / f"train_{mode}.csv", ("metric", "value"), sorted(res.items()))
    _log(f"train {mode}: " + ", ".join(f"{k} = {v:.4f}" for k, v in sorted(res.items())), quiet)
    return res


def _train_cascade(imgs, rows, rng, cfg: RunConfig, out: Path) -> dict:
    wins = np.stack([resize_bicubic(as_gray(im), cascade.WINDOW, cascade.WINDOW)
                     if as_gray(im).shape != (cascade.WINDOW,) * 2 else as_gray(im) for im in imgs])
    y = np.array([r.face is not None for r in rows])
    _need(int(y.sum()), "face windows")
    _need(int((~y).sum()), "non-face windows")
    p_tr, p_te = _split(np.nonzero(y)[0], rng)
    n_tr, n_te = _split(np.nonzero(~y)[0], rng)
    pool = wins[n_tr]

    def source(n, r, model):
        return pool[r.integers(0, len(pool), n)]

    model, rep = cascade.train_cascade(wins[p_tr], source, n_stages=6, f_target=0.3, max_weak=20,
                                       n_neg=len(pool), pool_size=2000, seed=cfg.seed)
    cascade.save(model, out / MODEL_FILES["face"])
    tpr = float(model.classify_windows(wins[p_te]).mean())
    fpr = float(model.classify_windows(wins[n_te]).mean())
    return {"stages": float(len(model.stages)), "heldout_tpr": tpr, "heldout_fpr": fpr,
            "heldout_n": float(len(p_te) + len(n_te))}


def _train_subspace(imgs, rows, rng, mode: str, out: Path) -> dict:
    y = np.array([r.eye is not None for r in rows])
    _need(int(y.sum()), "eye crops")
    _need(int((~y).sum()), "non-eye crops")
    patches = [_eye_patch(im) for im in imgs]
    e_tr, e_te = _split(np.nonzero(y)[0], rng)
    _, n_te = _split(np.nonzero(~y)[0], rng)
    if mode == "subspace":
        model = subspace.train_patch_model([patches[i] for i in e_tr], _rank(15, len(e_tr)))
        vec = subspace.normalize_patch
        name = "eye"
    else:
        model = subspace.pca_train(np.stack([eyestate.block_lbp(patches[i]) for i in e_tr]), _rank(40, len(e_tr)))
        vec = eyestate.block_lbp
        name = "lbp"
    subspace.save(model, out / MODEL_FILES[name])
    test = np.r_[e_te, n_te]
    err = np.array([subspace.reconstruction_error(model, vec(patches[i])) for i in test])
    labels = np.r_[np.ones(len(e_te), int), np.zeros(len(n_te), int)]
    # low reconstruction error means "eye"
    auc = metrics.roc_auc(-err, labels)
    return {"k": float(model.k), "heldout_auc": auc,
            "heldout_mean_e_eye": float(err[: len(e_te)].mean()),
            "heldout_mean_e_other": float(err[len(e_te):].mean())}


def _train_svm(imgs, rows, rng, cfg: RunConfig, out: Path) -> dict:
    keep = [i for i, r in enumerate(rows) if r.state in (eyestate.OPEN, eyestate.CLOSED)]
    y = np.array([rows[i].state == eyestate.CLOSED for i in keep])
    _need(int(y.sum()), "closed-eye crops")
    _need(int((~y).sum()), "open-eye crops")
    patches = [_eye_patch(imgs[i]) for i in keep]
    c_tr, c_te = _split(np.nonzero(y)[0], rng)
    o_tr, o_te = _split(np.nonzero(~y)[0], rng)
    tr = np.r_[c_tr, o_tr]
    te = np.r_[c_te, o_te]
    if cfg.features == "pixels":
        feat_model = subspace.train_patch_model([patches[i] for i in tr], _rank(15, len(tr)))
        subspace.save(feat_model, out / MODEL_FILES["eye"])
        clf_name = "svm"
    else:
        feat_model = subspace.pca_train(np.stack([eyestate.block_lbp(patches[i]) for i in tr]), _rank(40, len(tr)))
        subspace.save(feat_model, out / MODEL_FILES["lbp"])
        clf_name = "svm_lbp"
    X = np.stack([eyestate.eye_features(p, feat_model, cfg.features) for p in patches])
    clf = eyestate.classifier_train(X[tr], y[tr].astype(int), cfg.kernel, cfg.degree)
    eyestate.save(clf, out / MODEL_FILES[clf_name])
    pred = clf.predict(X[te]).astype(bool)
    scores = clf.decision(X[te])
    return {"heldout_accuracy": float((pred == y[te]).mean()),
            "heldout_auc": metrics.roc_auc(scores, y[te].astype(int)),
            "support_vectors": float(len(clf.support_vectors))}
