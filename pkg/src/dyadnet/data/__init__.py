from .primitives import (
    CIRCULAR,
    EXPAND,
    HORIZONTAL,
    PRIMITIVE_KINDS,
    STILL,
    VERTICAL,
    ZIGZAG,
    MotionPrimitive,
    render_clip,
    square_geometry,
)
from .format import (
    ASYNC,
    SYNC,
    ClipPair,
    Manifest,
    ManifestRecord,
    read_clip_pair,
    read_manifest,
    write_clip_pair,
    write_manifest,
)
from .generate import (
    CLASS_TABLES,
    MANIFEST_FILE,
    META_FILE,
    ClassSpec,
    LoadedSplit,
    async6_classes,
    generate_dataset,
    load_split,
    make_clip_pair,
    record_seed,
    scale6_classes,
    sync6_classes,
)

__all__ = [
    "CIRCULAR", "EXPAND", "HORIZONTAL", "PRIMITIVE_KINDS", "STILL", "VERTICAL",
    "ZIGZAG", "MotionPrimitive", "render_clip", "square_geometry",
    "ASYNC", "SYNC", "ClipPair", "Manifest", "ManifestRecord", "read_clip_pair",
    "read_manifest", "write_clip_pair", "write_manifest",
    "CLASS_TABLES", "MANIFEST_FILE", "META_FILE", "ClassSpec", "LoadedSplit",
    "async6_classes", "generate_dataset", "load_split", "make_clip_pair",
    "record_seed", "scale6_classes", "sync6_classes",
]
