import os
from pathlib import Path

import pytest

# Real-data checks (CrisisMMD-format exports, Twitter-trained embeddings,
# extracted image features) activate when this points at a directory with
# <event>.tsv, embeddings.txt and <event>_image_features.txt files.
DATA_DIR_VAR = "CRISISFILTER_DATA_DIR"


def real_data_dir() -> Path | None:
    d = os.environ.get(DATA_DIR_VAR)
    if d and Path(d).is_dir():
        return Path(d)
    return None


def require_real_data():
    if real_data_dir() is None:
        pytest.skip(f"real dataset not available (set ${DATA_DIR_VAR})")
    return real_data_dir()


def write_posts_tsv(path, rows):
    """rows: (post_id, text, image_ids, label, event) tuples."""
    lines = ["post_id\ttext\timage_ids\tlabel\tevent"]
    for r in rows:
        lines.append("\t".join(r))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)
