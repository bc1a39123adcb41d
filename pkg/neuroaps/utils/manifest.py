import hashlib

import yaml

from neuroaps.api.dataclasses import ManifestRecord
from neuroaps.api.exceptions import FormatException, IntegrityException, InvalidInputException
from neuroaps.utils.utils import atomic_write

__all__ = ["write_manifest", "read_manifest", "load_manifest", "render_manifest", "parse_manifest", "manifest_digest"]

CHECKSUM_PREFIX = "sha256: "
FIELDS = ("sample_id", "label", "path", "split")


def render_manifest(records, meta=None) -> str:
    """
    Texto do manifesto: corpo YAML seguido de uma linha com o sha256 do corpo.
    """
    document = dict(format="neuroaps-manifest", version=1, meta=dict(meta or {}),
                    records=[{k: r.to_dict()[k] for k in FIELDS} for r in records])
    body = yaml.safe_dump(document, sort_keys=False, default_flow_style=False)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return body + CHECKSUM_PREFIX + digest + "\n"


def parse_manifest(text):
    lines = text.rstrip("\n").split("\n")
    if not lines or not lines[-1].startswith(CHECKSUM_PREFIX):
        raise IntegrityException("manifest has no checksum line")
    body = "\n".join(lines[:-1]) + "\n"
    expected = lines[-1][len(CHECKSUM_PREFIX):].strip()
    actual = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if actual != expected:
        raise IntegrityException("manifest checksum mismatch: stored {} but body hashes to {}".format(expected, actual))
    try:
        document = yaml.safe_load(body)
    except yaml.YAMLError as e:
        raise FormatException("manifest body is not valid YAML: {}".format(e))
    if not isinstance(document, dict) or document.get("format") != "neuroaps-manifest":
        raise FormatException("not a neuroaps manifest")
    entries = document.get("records") or []
    meta = document.get("meta") or {}
    if not isinstance(entries, list) or not isinstance(meta, dict):
        raise FormatException("manifest records must be a list and meta a mapping")
    records = []
    for entry in entries:
        try:
            records.append(ManifestRecord(**{k: entry[k] for k in FIELDS}))
        except (KeyError, TypeError, ValueError, InvalidInputException) as e:
            raise FormatException("malformed manifest record {}: {}".format(entry, e))
    return records, dict(meta)


def write_manifest(path, records, meta=None):
    with atomic_write(path) as f:
        f.write(render_manifest(records, meta))


def load_manifest(path):
    """
    Lê um manifesto e confere o checksum.

    Returns:
        (lista de ManifestRecord, dicionário meta)
    """
    try:
        with open(path, "rt", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise FormatException("cannot read manifest {}: {}".format(path, e))
    return parse_manifest(text)


def read_manifest(path):
    return load_manifest(path)[0]


def manifest_digest(path):
    """sha256 gravado na última linha do manifesto (identifica o conteúdo, não o caminho)."""
    try:
        with open(path, "rt", encoding="utf-8") as f:
            last = f.read().rstrip("\n").split("\n")[-1]
    except OSError as e:
        raise FormatException("cannot read manifest {}: {}".format(path, e))
    if not last.startswith(CHECKSUM_PREFIX):
        raise IntegrityException("manifest {} has no checksum line".format(path))
    return last[len(CHECKSUM_PREFIX):].strip()
