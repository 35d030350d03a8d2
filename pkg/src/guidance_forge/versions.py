"""Format version constants, importable without pulling in torch."""

PACKAGE_VERSION = "0.1.0"
MANIFEST_SCHEMA_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
