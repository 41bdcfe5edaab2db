"""Randomized scene sampling and exact mixture rendering.

A mixture is built as ``x = h * s_target (80% of scenes) + interferers + noise``:
the reverberant (or dry) target ``t`` anchors two exact level constraints,

* each interferer is first leveled individually against ``t`` (its own
  randomized loudness), then the whole interferer sum is rescaled with one
  common factor so the aggregate SIR between ``t`` and the sum hits the
  requested value exactly;
* the single noise source is scaled so the SNR between ``t`` and the noise
  hits the requested value exactly.

Rendering is deterministic: every scene carries its own ``render_seed`` and
crop/loop phases are drawn from it, so a manifest rebuilt from the same
global seed is byte-identical no matter how scenes are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assets import GENERIC, GROUP, AssetLibrary, SpeakerPool, TalkerGroup
from .audio import AudioClip, convolve_rir, gain_for_ratio, input_sdr, mean_square
from .errors import (
    ConfigError,
    GroupTooSmallError,
    NoEnrollmentSourceError,
    SilentSourceError,
)
from .manifest import ManifestRecord, write_manifest
from .seeding import make_rng, mix_seed
from .wavio import write_wav

#: after mixing, peaks above this are rescaled (stems and mixture together,
#: so every controlled ratio is preserved)
PEAK_LIMIT = 1.0
PEAK_TARGET = 0.99


@dataclass
class SynthConfig:
    """Knobs of one dataset synthesis run (the ``[synth]`` config section)."""

    sample_rate: int = 16000
    duration_s: float = 10.0
    k_range: tuple[int, int] = (1, 5)
    sir_range_db: tuple[float, float] = (-5.0, 25.0)
    snr_range_db: tuple[float, float] = (-5.0, 25.0)
    reverb_prob: float = 0.8
    enrollment_duration_s: float = 3.0
    hours: float = 2.2
    splits: dict[str, float] = field(default_factory=lambda: {"train": 10.0, "val": 1.0})
    seed: int = 0
    clip_k_to_group: bool = True

    def __post_init__(self):
        if self.k_range[0] < 1 or self.k_range[1] < self.k_range[0]:
            raise ConfigError(f"bad k_range {self.k_range}")
        if self.k_range[1] > 5:
            raise ConfigError("mixtures hold at most 5 speakers")
        if not 0.0 <= self.reverb_prob <= 1.0:
            raise ConfigError(f"bad reverb_prob {self.reverb_prob}")
        if self.duration_s <= 0 or self.hours <= 0:
            raise ConfigError("duration_s and hours must be positive")
        if not self.splits or any(w <= 0 for w in self.splits.values()):
            raise ConfigError(f"bad splits {self.splits}")

    @classmethod
    def group_default(cls, **overrides) -> "SynthConfig":
        """Talker-group flavor: noisier SNR range, adapt/val/test splits
        sized 2:1:2 like the 20/10/20-hour group datasets."""
        base = dict(
            snr_range_db=(-15.0, 15.0),
            hours=0.5,
            splits={"adapt": 2.0, "val": 1.0, "test": 2.0},
        )
        base.update(overrides)
        return cls(**base)

    @property
    def n_scenes(self) -> int:
        return math.ceil(self.hours * 3600.0 / self.duration_s)


@dataclass(frozen=True)
class SceneSpec:
    """The full recipe for one mixture; rendering it is pure."""

    scene_id: str
    target_speaker: str
    target_utterance: str
    interferer_speakers: tuple[str, ...]
    interferer_utterances: tuple[str, ...]
    k: int
    sir_db: float | None
    per_interferer_level_db: tuple[float, ...]
    snr_db: float
    reverb_on_target: bool
    rir_ref: str
    noise_ref: str
    duration_s: float
    group_id: int | None
    render_seed: int

    def __post_init__(self):
        if self.k != len(self.interferer_speakers) + 1:
            raise ConfigError("K does not match the speaker lists")
        if self.k == 1 and self.sir_db is not None:
            raise ConfigError("sir_db must be not-applicable for K == 1")
        spks = (self.target_speaker, *self.interferer_speakers)
        if len(set(spks)) != len(spks):
            raise ConfigError("speakers in one scene must be distinct")


@dataclass
class RenderedScene:
    mixture: AudioClip
    dry_target: AudioClip
    reverberant_target: AudioClip
    interferers: tuple[AudioClip, ...]
    noise: AudioClip
    peak_rescale: float

    def stem_sum(self) -> np.ndarray:
        out = self.reverberant_target.samples.copy()
        for itf in self.interferers:
            out += itf.samples
        out += self.noise.samples
        return out


def fit_length(samples: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Crop at a random offset, or loop with a random phase, to length n."""
    m = samples.shape[0]
    if m == n:
        return samples.copy()
    if m > n:
        off = int(rng.integers(0, m - n + 1))
        return samples[off : off + n].copy()
    phase = int(rng.integers(0, m))
    idx = (phase + np.arange(n)) % m
    return samples[idx]


def sample_scene(
    rng_seed: int,
    config: SynthConfig,
    library: AssetLibrary,
    group: TalkerGroup | None = None,
    scene_id: str | None = None,
) -> SceneSpec:
    """Draw one scene recipe. Deterministic given (rng_seed, config)."""
    rng = make_rng(rng_seed)
    pool = library.speaker_pool(GROUP if group else GENERIC)
    if group is not None:
        pool = pool.restricted(group.members)

    k_lo, k_hi = config.k_range
    if group is not None and k_hi > len(group.members):
        if not config.clip_k_to_group:
            raise GroupTooSmallError(
                f"group {group.group_id} has {len(group.members)} members, "
                f"k_range asks for up to {k_hi}"
            )
        k_hi = len(group.members)
        k_lo = min(k_lo, k_hi)
    k = int(rng.integers(k_lo, k_hi + 1))

    speakers = [str(s) for s in rng.choice(pool.speakers, size=k, replace=False)]
    utterances = [str(rng.choice(pool.utterances[s])) for s in speakers]

    # one uniform draw each, regardless of K, to keep the stream layout fixed
    sir = float(rng.uniform(*config.sir_range_db))
    levels = tuple(float(v) for v in rng.uniform(*config.sir_range_db, size=k - 1))
    snr = float(rng.uniform(*config.snr_range_db))
    reverb = bool(rng.random() < config.reverb_prob)

    room = group.room_id if group else str(rng.choice(library.rooms(GENERIC)))
    rir_ref = str(rng.choice(library.rirs_in_room(room)))
    domain = group.noise_domain if group else None
    noise_ref = str(rng.choice(library.noise_refs(domain)))

    return SceneSpec(
        scene_id=scene_id if scene_id is not None else f"s{rng_seed:016x}",
        target_speaker=speakers[0],
        target_utterance=utterances[0],
        interferer_speakers=tuple(speakers[1:]),
        interferer_utterances=tuple(utterances[1:]),
        k=k,
        sir_db=sir if k >= 2 else None,
        per_interferer_level_db=levels,
        snr_db=snr,
        reverb_on_target=reverb,
        rir_ref=rir_ref,
        noise_ref=noise_ref,
        duration_s=config.duration_s,
        group_id=group.group_id if group else None,
        render_seed=int(rng.integers(0, 2**63)),
    )


def _cropped(library: AssetLibrary, ref: str, n: int, rng: np.random.Generator) -> np.ndarray:
    clip = library.load(ref)
    out = fit_length(clip.samples, n, rng)
    if mean_square(out) == 0.0:
        raise SilentSourceError(f"asset {ref!r} is silent after cropping")
    return out


def render_scene(
    spec: SceneSpec,
    library: AssetLibrary,
    noise_gain: float | None = None,
) -> RenderedScene:
    """Render all stems of a scene with exact SIR/SNR.

    ``noise_gain`` overrides the solved noise scale (0.0 gives a noise-free
    mixture for degenerate checks); by default the gain realizes
    ``spec.snr_db`` exactly.
    """
    rng = make_rng(spec.render_seed)
    sr = library.sample_rate
    n = int(round(spec.duration_s * sr))

    dry = _cropped(library, spec.target_utterance, n, rng)
    dry_clip = AudioClip(dry, sr, spec.target_utterance)
    if spec.reverb_on_target:
        rir = library.load(spec.rir_ref)
        reverberant = convolve_rir(dry_clip, rir)
        reverberant = AudioClip(reverberant.samples, sr, f"{spec.target_utterance}|{spec.rir_ref}")
    else:
        reverberant = AudioClip(dry.copy(), sr, spec.target_utterance)

    interferer_arrays: list[np.ndarray] = []
    if spec.k >= 2:
        prescaled = []
        for ref, level_db in zip(spec.interferer_utterances, spec.per_interferer_level_db):
            u = _cropped(library, ref, n, rng)
            g = gain_for_ratio(reverberant, AudioClip(u, sr, ref), level_db)
            prescaled.append(g * u)
        agg = np.sum(prescaled, axis=0)
        common = gain_for_ratio(reverberant, AudioClip(agg, sr, "interferer-sum"), spec.sir_db)
        interferer_arrays = [common * p for p in prescaled]

    noise_raw = _cropped(library, spec.noise_ref, n, rng)
    if noise_gain is None:
        noise_gain = gain_for_ratio(reverberant, AudioClip(noise_raw, sr, spec.noise_ref), spec.snr_db)
    noise_arr = noise_gain * noise_raw

    mixture = reverberant.samples.copy()
    for arr in interferer_arrays:
        mixture += arr
    mixture += noise_arr

    scale = 1.0
    peak = float(np.max(np.abs(mixture))) if mixture.size else 0.0
    if peak > PEAK_LIMIT:
        scale = PEAK_TARGET / peak

    return RenderedScene(
        mixture=AudioClip(mixture * scale, sr, f"{spec.scene_id}:mixture"),
        dry_target=AudioClip(dry * scale, sr, f"{spec.scene_id}:dry_target"),
        reverberant_target=AudioClip(
            reverberant.samples * scale, sr, f"{spec.scene_id}:reverberant_target"
        ),
        interferers=tuple(
            AudioClip(arr * scale, sr, f"{spec.scene_id}:interferer{i}")
            for i, arr in enumerate(interferer_arrays)
        ),
        noise=AudioClip(noise_arr * scale, sr, f"{spec.scene_id}:noise"),
        peak_rescale=scale,
    )


def select_enrollment(
    library: AssetLibrary,
    pool: SpeakerPool,
    speaker: str,
    exclude_utterance: str,
    rng_seed: int,
    duration_s: float = 3.0,
) -> AudioClip:
    """A fixed-duration enrollment crop from a different utterance of the
    same speaker. Deterministic given the seed."""
    candidates = [u for u in pool.utterances.get(speaker, ()) if u != exclude_utterance]
    if not candidates:
        raise NoEnrollmentSourceError(
            f"speaker {speaker!r} has no utterance besides {exclude_utterance!r}"
        )
    rng = make_rng(rng_seed)
    ref = str(rng.choice(candidates))
    n = int(round(duration_s * library.sample_rate))
    samples = fit_length(library.load(ref).samples, n, rng)
    return AudioClip(samples, library.sample_rate, ref)


def _split_for_index(i: int, n: int, splits: dict[str, float]) -> str:
    total = sum(splits.values())
    cum = 0.0
    frac = (i + 0.5) / n
    for name, weight in splits.items():
        cum += weight / total
        if frac < cum:
            return name
    return list(splits)[-1]


def build_manifest(
    config: SynthConfig,
    library: AssetLibrary,
    out_dir: str | Path,
    group: TalkerGroup | None = None,
) -> Path:
    """Render ``ceil(hours * 3600 / duration)`` scenes, write their stems and
    the JSONL manifest, and return the manifest path."""
    if library.sample_rate != config.sample_rate:
        raise ConfigError(
            f"library rate {library.sample_rate} != config rate {config.sample_rate}"
        )
    out_dir = Path(out_dir)
    stems = out_dir / "stems"
    pool = library.speaker_pool(GROUP if group else GENERIC)
    if group is not None:
        pool = pool.restricted(group.members)

    prefix = f"g{group.group_id}" if group else "gen"
    n = config.n_scenes
    records: list[ManifestRecord] = []
    for i in range(n):
        seed_i = mix_seed(config.seed, i)
        scene_id = f"{prefix}_{i:06d}"
        spec = sample_scene(seed_i, config, library, group, scene_id=scene_id)
        rendered = render_scene(spec, library)
        enrollment = select_enrollment(
            library,
            pool,
            spec.target_speaker,
            spec.target_utterance,
            mix_seed(seed_i, "enroll"),
            config.enrollment_duration_s,
        )
        paths = {
            "mixture": f"stems/{scene_id}.mixture.wav",
            "dry_target": f"stems/{scene_id}.dry_target.wav",
            "reverberant_target": f"stems/{scene_id}.reverberant_target.wav",
            "enrollment": f"stems/{scene_id}.enrollment.wav",
        }
        write_wav(out_dir / paths["mixture"], rendered.mixture)
        write_wav(out_dir / paths["dry_target"], rendered.dry_target)
        write_wav(out_dir / paths["reverberant_target"], rendered.reverberant_target)
        write_wav(out_dir / paths["enrollment"], enrollment)
        records.append(
            ManifestRecord(
                scene_id=scene_id,
                paths=paths,
                K=spec.k,
                sir_db=spec.sir_db,
                snr_db=spec.snr_db,
                reverb_on_target=spec.reverb_on_target,
                group_id=spec.group_id,
                measured_input_sdr_db=input_sdr(rendered.mixture, rendered.dry_target),
                split=_split_for_index(i, n, config.splits),
                target_speaker=spec.target_speaker,
            )
        )
    return write_manifest(records, out_dir / "manifest.jsonl")
