"""Screen snapshots: parsing, noise filtering, labels, PII redaction, fingerprints."""

from uitasker.ui.anonymize import RedactionMap, Substitution, anonymize, deanonymize
from uitasker.ui.filtering import filter_noise
from uitasker.ui.fingerprint import (
    ScreenFingerprint,
    fingerprint,
    hamming,
    layout_signature,
    quantize_bounds,
)
from uitasker.ui.labels import derive_label, humanize_resource_name
from uitasker.ui.serialize import serialize_for_prompt
from uitasker.ui.snapshot import (
    Bounds,
    MalformedSnapshot,
    ScreenSnapshot,
    UiCapability,
    UiElement,
    parse_snapshot,
    snapshot_to_document,
)

__all__ = [
    "Bounds",
    "MalformedSnapshot",
    "RedactionMap",
    "ScreenFingerprint",
    "ScreenSnapshot",
    "Substitution",
    "UiCapability",
    "UiElement",
    "anonymize",
    "deanonymize",
    "derive_label",
    "filter_noise",
    "fingerprint",
    "hamming",
    "humanize_resource_name",
    "layout_signature",
    "parse_snapshot",
    "quantize_bounds",
    "serialize_for_prompt",
    "snapshot_to_document",
]
