"""
Versioned prompt assets.

Templates are stored as plain text files next to a checksum manifest; they are
read as raw bytes so that whitespace and spelling reach the model unchanged.
"""

import hashlib
import json
import os
from functools import lru_cache

from factcurve.utils.errors import ConfigError

TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")

BIO = "bio.txt"
DECOMPOSE = "decompose.txt"
DERIVE_QA = "derive_qa.txt"
DIRECT_ASKING = "direct_asking.txt"
QUESTION_ANSWERING = "question_answering.txt"
QA_WITH_NOA = "qa_with_noa.txt"


@lru_cache(maxsize=None)
def _manifest():
    with open(os.path.join(TEMPLATES_DIR, "checksums.json"), "r", encoding="utf-8") as file:
        return json.load(file)


def template_version():
    return _manifest()["version"]


def template_checksum(name):
    """SHA-256 recorded for a template in the manifest."""
    return _manifest()["sha256"][name]


@lru_cache(maxsize=None)
def load_template(name):
    """
    Loads a template and verifies it against the checksum manifest.

    :param name: File name of the template (e.g. DIRECT_ASKING).
    :return: The template text, decoded as UTF-8, byte-for-byte as stored.
    """
    path = os.path.join(TEMPLATES_DIR, name)
    try:
        with open(path, "rb") as file:
            raw = file.read()
    except FileNotFoundError:
        raise ConfigError(f"Prompt template not found at {path}.")

    expected = _manifest()["sha256"].get(name)
    actual = hashlib.sha256(raw).hexdigest()
    if expected != actual:
        raise ConfigError(f"Prompt template {name} does not match its recorded checksum.")
    return raw.decode("utf-8")


def render(name, **fields):
    """Fills a template's named placeholders."""
    return load_template(name).format(**fields)
