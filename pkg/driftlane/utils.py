# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import hashlib
import os
import pickle
import tempfile

import numpy as np


def atomic_write(path, data):
    """Write `data` (str or bytes) to a temporary file, then rename it over `path`."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    if isinstance(data, str):
        data = data.encode("utf-8")

    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def state_fingerprint(obj):
    return hashlib.sha256(pickle.dumps(obj, protocol=4)).hexdigest()


def derive_seed(seed, *keys):
    """Deterministic child seed, so members and replacements never share a stream."""
    sequence = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(sequence.generate_state(1)[0])
