"""Key-file drop: the confidential delivery path for KeyIssue.

Layout of a key directory:

    params.profile       shared parameter profile
    aggregator.profile   what the aggregator gets (parameters only)
    client-<i>.key       one framed KeyIssue per client

All files are written to temporaries first and renamed into place once every
file is complete. Files being replaced are kept aside until the whole set is
in place, so a failure leaves either the previous set or nothing, never a mix.
"""

from __future__ import annotations

import io
import logging
import os
import tempfile
from pathlib import Path

from esafl.config import profile
from esafl.scheme.errors import MalformedMessageError
from esafl.scheme.params import SchemeParams
from esafl.wire.frames import read_frame_sync, write_frame_sync
from esafl.wire.messages import KeyIssue, deserialize, to_frame

logger = logging.getLogger(__name__)

PARAMS_FILE = "params.profile"
AGGREGATOR_FILE = "aggregator.profile"


def client_key_path(directory: Path, client_id: int) -> Path:
    return directory / f"client-{client_id}.key"


def write_key_set(directory: Path, params: SchemeParams, issues: list[KeyIssue]) -> list[Path]:
    """Write the profile files and one key file per client, atomically as a set.

    Raises:
        OSError: if the directory cannot be created or written; nothing is
            left behind in that case.
    """
    directory.mkdir(parents=True, exist_ok=True)
    text = profile.dumps(params).encode("ascii")
    contents: dict[Path, bytes] = {
        directory / PARAMS_FILE: text,
        directory / AGGREGATOR_FILE: text,
    }
    for issue in issues:
        buffer = io.BytesIO()
        write_frame_sync(buffer, to_frame(issue))
        contents[client_key_path(directory, issue.client_id)] = buffer.getvalue()

    staged: list[tuple[Path, Path]] = []
    try:
        for target, data in contents.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
            staged.append((Path(tmp), target))
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            if target.suffix == ".key":
                os.chmod(tmp, 0o600)
    except OSError:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    _install(staged)
    logger.info(f"Wrote {len(issues)} client key files and profiles to {directory}")
    return [target for _, target in staged]


def _install(staged: list[tuple[Path, Path]]) -> None:
    """Rename staged files over their targets; on failure restore every previous file."""
    installed: list[tuple[Path, Path | None]] = []
    try:
        for tmp, target in staged:
            backup = None
            if target.exists():
                backup = target.with_name(f".{target.name}.previous")
                os.replace(target, backup)
            installed.append((target, backup))
            os.replace(tmp, target)
    except OSError:
        for target, backup in reversed(installed):
            if backup is None:
                target.unlink(missing_ok=True)
            else:
                os.replace(backup, target)
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        logger.error(f"Key set install in {staged[0][1].parent} failed, previous files restored")
        raise
    for _, backup in installed:
        if backup is not None:
            backup.unlink()


def read_key_issue(path: Path) -> KeyIssue:
    """Load one client key file."""
    with path.open("rb") as handle:
        frame = read_frame_sync(handle)
        if frame is None:
            raise MalformedMessageError(f"{path} is empty")
        msg = deserialize(frame)
        if not isinstance(msg, KeyIssue) or handle.read(1):
            raise MalformedMessageError(f"{path} does not hold exactly one KeyIssue")
    return msg


def read_key_set(
    directory: Path, client_ids: list[int] | None = None
) -> tuple[SchemeParams, list[KeyIssue]]:
    """Load the shared profile and the requested (default: all) client keys."""
    params = profile.load(directory / PARAMS_FILE)
    ids = client_ids if client_ids is not None else list(range(params.num_clients))
    issues = [read_key_issue(client_key_path(directory, i)) for i in ids]
    for issue in issues:
        if issue.params != params:
            raise MalformedMessageError(
                f"key file of client {issue.client_id} was issued for other parameters"
            )
    return params, issues
