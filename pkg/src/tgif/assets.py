"""Asset ingestion and the procedural asset generator.

Assets are plain mono WAV files keyed by a path convention below a root
directory; any corpus laid out the same way can be used:

    <root>/speech/generic/<speaker>/<utterance>.wav   speaker pool for pretraining
    <root>/speech/group/<speaker>/<utterance>.wav     disjoint pool for talker groups
    <root>/noise/<domain>/<clip>.wav
    <root>/rir/generic/<room>/<rir>.wav
    <root>/rir/group/<room>/<rir>.wav
    <root>/groups.json                                fixed talker-group definitions

The bundled generator fabricates a corpus-free stand-in: each "speaker" is a
set of resonant filters applied to noise (a stable per-speaker spectral
envelope plus syllable-rate amplitude modulation), rooms are exponentially
decaying impulse responses, and noise domains are differently colored or
modulated noise. Amplitude envelopes are floored away from zero so random
crops are never silent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

import numpy as np
from scipy.signal import butter, iirpeak, lfilter

from .audio import AudioClip
from .errors import AssetNotFoundError, ConfigError, NoEnrollmentSourceError
from .seeding import make_rng
from .wavio import read_wav, write_wav

GENERIC = "generic"
GROUP = "group"


@dataclass(frozen=True)
class SpeakerPool:
    """Speakers available for one role, each with >= 2 utterances so one can
    always serve as an enrollment source."""

    speakers: tuple[str, ...]
    utterances: dict[str, tuple[str, ...]]
    role: str

    def validate(self) -> None:
        for spk in self.speakers:
            if len(self.utterances.get(spk, ())) < 2:
                raise NoEnrollmentSourceError(
                    f"speaker {spk!r} has fewer than 2 utterances"
                )

    def restricted(self, members: tuple[str, ...]) -> "SpeakerPool":
        missing = [m for m in members if m not in self.utterances]
        if missing:
            raise AssetNotFoundError(f"group members without utterances: {missing}")
        return SpeakerPool(
            speakers=tuple(members),
            utterances={m: self.utterances[m] for m in members},
            role=self.role,
        )


@dataclass(frozen=True)
class TalkerGroup:
    """A fixed set of up to five talkers tied to one room and one noise domain."""

    group_id: int
    members: tuple[str, ...]
    room_id: str
    noise_domain: str

    def validate(self) -> None:
        if not 1 <= len(self.members) <= 5:
            raise ConfigError(
                f"group {self.group_id}: {len(self.members)} members, expected 1..5"
            )
        if len(set(self.members)) != len(self.members):
            raise ConfigError(f"group {self.group_id}: duplicate members")


class AssetLibrary:
    """Resolver over an asset directory tree.

    All listings are sorted so sampling from them is deterministic. Loaded
    clips are cached; files at the wrong sample rate are rejected.
    """

    def __init__(self, root: str | Path, sample_rate: int):
        self.root = Path(root)
        self.sample_rate = int(sample_rate)
        if not self.root.is_dir():
            raise AssetNotFoundError(f"asset root {self.root} does not exist")
        self._cache: dict[str, AudioClip] = {}
        self._speech: dict[str, dict[str, tuple[str, ...]]] = {}
        self._noise: dict[str, tuple[str, ...]] = {}
        self._rirs: dict[str, tuple[str, ...]] = {}
        self._scan()
        self._groups = self._load_groups()

    def _rel(self, path: Path) -> str:
        return PurePosixPath(path.relative_to(self.root)).as_posix()

    def _scan(self) -> None:
        for role in (GENERIC, GROUP):
            role_dir = self.root / "speech" / role
            pool: dict[str, tuple[str, ...]] = {}
            if role_dir.is_dir():
                for spk_dir in sorted(p for p in role_dir.iterdir() if p.is_dir()):
                    utts = tuple(self._rel(p) for p in sorted(spk_dir.glob("*.wav")))
                    if utts:
                        pool[spk_dir.name] = utts
            self._speech[role] = pool
        noise_dir = self.root / "noise"
        if noise_dir.is_dir():
            for dom_dir in sorted(p for p in noise_dir.iterdir() if p.is_dir()):
                refs = tuple(self._rel(p) for p in sorted(dom_dir.glob("*.wav")))
                if refs:
                    self._noise[dom_dir.name] = refs
        for kind in (GENERIC, GROUP):
            kind_dir = self.root / "rir" / kind
            if kind_dir.is_dir():
                for room_dir in sorted(p for p in kind_dir.iterdir() if p.is_dir()):
                    refs = tuple(self._rel(p) for p in sorted(room_dir.glob("*.wav")))
                    if refs:
                        self._rirs[f"{kind}/{room_dir.name}"] = refs

    def _load_groups(self) -> dict[int, TalkerGroup]:
        path = self.root / "groups.json"
        groups: dict[int, TalkerGroup] = {}
        if not path.is_file():
            return groups
        for entry in json.loads(path.read_text()):
            grp = TalkerGroup(
                group_id=int(entry["group_id"]),
                members=tuple(entry["members"]),
                room_id=str(entry["room_id"]),
                noise_domain=str(entry["noise_domain"]),
            )
            grp.validate()
            groups[grp.group_id] = grp
        return groups

    # -- lookups ---------------------------------------------------------

    def speaker_pool(self, role: str) -> SpeakerPool:
        if role not in self._speech or not self._speech[role]:
            raise AssetNotFoundError(f"no speech assets for role {role!r} under {self.root}")
        utts = self._speech[role]
        pool = SpeakerPool(tuple(sorted(utts)), dict(utts), role)
        pool.validate()
        return pool

    def groups(self) -> tuple[TalkerGroup, ...]:
        return tuple(self._groups[g] for g in sorted(self._groups))

    def group(self, group_id: int) -> TalkerGroup:
        if group_id not in self._groups:
            raise AssetNotFoundError(f"group {group_id} not defined in groups.json")
        return self._groups[group_id]

    def rooms(self, kind: str = GENERIC) -> tuple[str, ...]:
        found = tuple(sorted(r for r in self._rirs if r.startswith(f"{kind}/")))
        if not found:
            raise AssetNotFoundError(f"no {kind} rooms under {self.root}/rir")
        return found

    def rirs_in_room(self, room_id: str) -> tuple[str, ...]:
        if room_id not in self._rirs:
            raise AssetNotFoundError(f"room {room_id!r} has no impulse responses")
        return self._rirs[room_id]

    def noise_domains(self) -> tuple[str, ...]:
        return tuple(sorted(self._noise))

    def noise_refs(self, domain: str | None = None) -> tuple[str, ...]:
        if domain is None:
            refs = tuple(r for d in sorted(self._noise) for r in self._noise[d])
        else:
            refs = self._noise.get(domain, ())
        if not refs:
            raise AssetNotFoundError(f"no noise assets for domain {domain!r}")
        return refs

    def load(self, ref: str) -> AudioClip:
        if ref not in self._cache:
            self._cache[ref] = read_wav(
                self.root / ref, expected_rate=self.sample_rate, source_id=ref
            )
        return self._cache[ref]


# -- procedural generation -------------------------------------------------


@dataclass
class AssetGenConfig:
    sample_rate: int = 16000
    utterance_s: float = 4.0
    utterances_per_speaker: int = 4
    generic_speakers: int = 24
    group_speakers: int = 12
    generic_rooms: int = 3
    group_rooms: int = 2
    rirs_per_room: int = 3
    noise_clips_per_domain: int = 4
    noise_s: float = 4.0
    n_groups: int = 2
    group_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_groups * self.group_size > self.group_speakers:
            raise ConfigError(
                "group_speakers too small for the requested disjoint groups"
            )
        if self.n_groups > self.group_rooms:
            raise ConfigError("need at least one room per group")


GENERIC_NOISE_DOMAINS = ("broadband", "tonal")
GROUP_NOISE_DOMAIN = "household"

#: speaker-id prefixes keep the two disjoint pools visually distinct
_SPK_PREFIX = {GENERIC: "gen", GROUP: "grp"}


def _am_envelope(rng: np.random.Generator, n: int, sr: int, rate_hz: float, floor: float) -> np.ndarray:
    """Slow positive modulation envelope, floored away from zero."""
    b, a = butter(2, min(rate_hz / (sr / 2), 0.99), btype="low")
    env = lfilter(b, a, rng.standard_normal(n))
    env = env - env.min()
    peak = env.max()
    if peak > 0:
        env = env / peak
    return floor + (1.0 - floor) * env


def _voice(rng: np.random.Generator, n: int, sr: int, formants: list[tuple[float, float, float]]) -> np.ndarray:
    """One utterance of a resonant-noise speaker with the given formant set."""
    excitation = rng.standard_normal(n)
    out = 0.05 * excitation
    for freq, q, gain in formants:
        b, a = iirpeak(freq / (sr / 2), q)
        out = out + gain * lfilter(b, a, excitation)
    out = out * _am_envelope(rng, n, sr, rate_hz=rng.uniform(2.0, 5.0), floor=0.3)
    rms = np.sqrt(np.mean(out**2))
    return 0.08 * out / rms


def _speaker_formants(rng: np.random.Generator, sr: int) -> list[tuple[float, float, float]]:
    lo, hi = 200.0, 0.42 * sr
    freqs = np.exp(rng.uniform(np.log(lo), np.log(hi), size=3))
    formants = []
    for f in np.sort(freqs):
        q = float(rng.uniform(4.0, 12.0))
        gain = float(rng.uniform(0.5, 1.0))
        formants.append((float(f), q, gain))
    return formants


def _rir(rng: np.random.Generator, sr: int, t60: float, direct_ratio: float) -> np.ndarray:
    n = max(8, int(t60 * sr))
    t = np.arange(n) / sr
    tail = rng.standard_normal(n) * np.exp(-6.9 * t / t60)
    tail[0] = 0.0
    tail_energy = np.sqrt(np.sum(tail**2))
    h = np.zeros(n)
    h[0] = 1.0
    if tail_energy > 0:
        h = h + tail * (np.sqrt((1.0 - direct_ratio) / direct_ratio) / tail_energy)
    return h / np.sqrt(np.sum(h**2))


def _noise_clip(rng: np.random.Generator, n: int, sr: int, domain: str) -> np.ndarray:
    white = rng.standard_normal(n)
    if domain == "broadband":
        # downward spectral tilt of random strength
        b, a = butter(1, rng.uniform(0.05, 0.5), btype="low")
        out = lfilter(b, a, white) + 0.2 * white
    elif domain == "tonal":
        base = rng.uniform(80.0, 300.0)
        t = np.arange(n) / sr
        out = 0.15 * white
        for k in range(1, 4):
            out = out + rng.uniform(0.3, 1.0) * np.sin(
                2 * np.pi * base * k * t + rng.uniform(0, 2 * np.pi)
            )
    elif domain == "household":
        hi = min(900.0 / (sr / 2), 0.9)
        b, a = butter(4, hi, btype="low")
        band = lfilter(b, a, white)
        t = np.arange(n) / sr
        hum = 0.3 * np.sin(2 * np.pi * 50.0 * t + rng.uniform(0, 2 * np.pi))
        bursts = _am_envelope(rng, n, sr, rate_hz=rng.uniform(1.0, 3.0), floor=0.25)
        out = band * bursts + hum
    else:
        out = white
    rms = np.sqrt(np.mean(out**2))
    return 0.08 * out / rms


def generate_assets(root: str | Path, cfg: AssetGenConfig) -> Path:
    """Write a complete procedural asset tree under ``root``."""
    root = Path(root)
    sr = cfg.sample_rate
    n_utt = int(round(cfg.utterance_s * sr))
    n_noise = int(round(cfg.noise_s * sr))

    def put(rel: str, samples: np.ndarray) -> None:
        write_wav(root / rel, AudioClip(samples, sr, rel))

    for role, count in ((GENERIC, cfg.generic_speakers), (GROUP, cfg.group_speakers)):
        for i in range(count):
            spk = f"{_SPK_PREFIX[role]}{i:03d}"
            formants = _speaker_formants(make_rng(cfg.seed, "voice", role, i), sr)
            for u in range(cfg.utterances_per_speaker):
                rng = make_rng(cfg.seed, "utt", role, i, u)
                put(f"speech/{role}/{spk}/utt{u:02d}.wav", _voice(rng, n_utt, sr, formants))

    for kind, count, t60_range in (
        (GENERIC, cfg.generic_rooms, (0.12, 0.35)),
        (GROUP, cfg.group_rooms, (0.08, 0.18)),  # small-room settings for groups
    ):
        for r in range(count):
            room_rng = make_rng(cfg.seed, "room", kind, r)
            t60 = float(room_rng.uniform(*t60_range))
            for j in range(cfg.rirs_per_room):
                rir_rng = make_rng(cfg.seed, "rir", kind, r, j)
                direct = float(rir_rng.uniform(0.4, 0.8))
                put(f"rir/{kind}/room{r:02d}/rir{j:02d}.wav", _rir(rir_rng, sr, t60, direct))

    for domain in GENERIC_NOISE_DOMAINS + (GROUP_NOISE_DOMAIN,):
        for i in range(cfg.noise_clips_per_domain):
            rng = make_rng(cfg.seed, "noise", domain, i)
            put(f"noise/{domain}/n{i:03d}.wav", _noise_clip(rng, n_noise, sr, domain))

    groups = []
    for g in range(cfg.n_groups):
        members = [
            f"{_SPK_PREFIX[GROUP]}{g * cfg.group_size + m:03d}"
            for m in range(cfg.group_size)
        ]
        groups.append(
            {
                "group_id": g + 1,
                "members": members,
                "room_id": f"group/room{g % cfg.group_rooms:02d}",
                "noise_domain": GROUP_NOISE_DOMAIN,
            }
        )
    (root / "groups.json").write_text(json.dumps(groups, indent=2) + "\n")
    return root
