"""Packaging of every supervision signal for one image into a bundle."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .crf import MAX_REFINE_SIDE, CrfParams, as_intensity_image, refine_vam
from .errors import FormatError, InvalidShape
from .formats import atomic_write, decode_mask, decode_pfm, encode_pfm, mask_to_pgm
from .grid import GazeRecord, GridShape
from .gtmg import CANONICAL_RATIOS, DEFAULT_DECAY, DecayParams, TrackAttentionMap, gtmg_bundle
from .vam import UNDER_ACTIVATION_THRESHOLD, VamParams, build_vam, threshold_mask

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class BundleParams:
    vam: VamParams = field(default_factory=VamParams)
    crf: CrfParams = field(default_factory=CrfParams)
    crf_max_side: int | None = MAX_REFINE_SIDE
    threshold: float = UNDER_ACTIVATION_THRESHOLD
    ratios: tuple[float, ...] = CANONICAL_RATIOS
    decay: DecayParams = DEFAULT_DECAY
    points_only: bool = False
    fast_distance: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        return d


@dataclass(frozen=True, eq=False)
class SupervisionBundle:
    image_id: str
    vam: np.ndarray
    vam_refined: np.ndarray
    hard_mask: np.ndarray
    track_maps: dict[float, TrackAttentionMap]
    params: BundleParams

    @property
    def shape(self) -> GridShape:
        return GridShape.of(self.vam)

    def payloads(self) -> dict[str, bytes]:
        """Encoded file contents keyed by file name."""
        files = {
            "vam.pfm": encode_pfm(self.vam),
            "vam_refined.pfm": encode_pfm(self.vam_refined),
            "hard_mask.pgm": mask_to_pgm(self.hard_mask),
        }
        for r, tm in sorted(self.track_maps.items()):
            files[track_file_name(r)] = encode_pfm(tm.values)
        return files

    def manifest(self, payloads: dict[str, bytes] | None = None) -> dict:
        payloads = self.payloads() if payloads is None else payloads
        return {
            "format_version": FORMAT_VERSION,
            "generator": f"gazetrack {__version__}",
            "image_id": self.image_id,
            "shape": {"width": self.shape.width, "height": self.shape.height},
            "params": self.params.to_dict(),
            "track_maps": {f"{r:g}": track_file_name(r) for r in sorted(self.track_maps)},
            "files": {
                name: {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
                for name, data in sorted(payloads.items())
            },
        }


def track_file_name(ratio: float) -> str:
    return f"track_{round(ratio * 100):03d}.pfm"


def manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")


def build_bundle(record: GazeRecord, image, params: BundleParams = BundleParams()) -> SupervisionBundle:
    """Run VAM, CRF refinement, thresholding and track maps for one image."""
    img = as_intensity_image(image)
    if img.shape[:2] != record.shape.dims:
        raise InvalidShape(
            f"image {img.shape[1]}x{img.shape[0]} does not match record "
            f"{record.shape.width}x{record.shape.height} for {record.image_id!r}"
        )
    vam = build_vam(record, params.vam)
    refined = refine_vam(vam, img, params.crf, max_side=params.crf_max_side)
    mask = threshold_mask(refined, params.threshold)
    maps = gtmg_bundle(record, record.shape, params.ratios, params.decay,
                       points_only=params.points_only, fast=params.fast_distance)
    return SupervisionBundle(record.image_id, vam, refined, mask,
                             {tm.ratio: tm for tm in maps}, params)


def write_bundle(bundle: SupervisionBundle, out_dir) -> Path:
    """Write all maps and the manifest under ``out_dir / image_id``."""
    target = Path(out_dir) / bundle.image_id
    payloads = bundle.payloads()
    for name, data in payloads.items():
        atomic_write(target / name, data)
    atomic_write(target / MANIFEST_NAME, manifest_bytes(bundle.manifest(payloads)))
    return target


@dataclass(frozen=True, eq=False)
class LoadedBundle:
    image_id: str
    manifest: dict
    vam: np.ndarray
    vam_refined: np.ndarray
    hard_mask: np.ndarray
    track_maps: dict[float, np.ndarray]


def load_bundle(bundle_dir, verify: bool = True) -> LoadedBundle:
    """Read a bundle directory back; with ``verify`` the hashes are checked."""
    root = Path(bundle_dir)
    manifest = json.loads((root / MANIFEST_NAME).read_text("utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported bundle format_version {manifest.get('format_version')!r}")
    raw = {}
    for name, entry in manifest["files"].items():
        data = (root / name).read_bytes()
        if verify and hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise FormatError(f"hash mismatch for {name} in {root}")
        raw[name] = data
    tracks = {float(r): decode_pfm(raw[name]) for r, name in manifest["track_maps"].items()}
    return LoadedBundle(
        manifest["image_id"], manifest,
        decode_pfm(raw["vam.pfm"]), decode_pfm(raw["vam_refined.pfm"]),
        decode_mask(raw["hard_mask.pgm"]), tracks,
    )
