import numpy as np
from loguru import logger

from kmanb_toolkit.errors import DataError

from .records import Dataset


def stratified_split(
    data: Dataset, train_fraction: float = 0.7, seed: int = 42
) -> tuple[Dataset, Dataset]:
    """Partition `data` per attack type so that each class contributes
    `round(n_c * train_fraction)` rows to train, never fewer than 1 and
    never all of them.

    Classes are visited in the profile's global order and rows keep their
    original relative order on both sides.

    Examples:
        >>> from kmanb_toolkit.dataset.profile import DeviceProfile
        >>> p = DeviceProfile(
        ...     device="toy",
        ...     features=[{"name": "x", "kind": "numeric"}],
        ...     attack_types=["ddos"],
        ... )
        >>> d = Dataset.from_columns(
        ...     p, {"x": [0, 1, 2, 3]}, ["normal", "ddos", "normal", "ddos"]
        ... )
        >>> train, test = stratified_split(d, 0.5, seed=1)
        >>> train.class_counts(), test.class_counts()
        ({'normal': 1, 'ddos': 1}, {'normal': 1, 'ddos': 1})
    """
    if not 0 < train_fraction < 1:
        raise DataError(f"{train_fraction=} must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    types = data.attack_types
    train_idx: list[np.ndarray] = []
    for cls in data.profile.classes:
        members = np.flatnonzero(types == cls)
        if members.size == 0:
            continue
        if members.size < 2:
            raise DataError(f"Class {cls!r} has fewer than 2 instances.")
        n_train = int(round(members.size * train_fraction))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.append(rng.choice(members, size=n_train, replace=False))
    picked = np.sort(np.concatenate(train_idx)) if train_idx else np.array([])
    mask = np.zeros(len(data), dtype=bool)
    mask[picked.astype(np.int64)] = True
    logger.debug(f"Split {len(data)} rows into {mask.sum()} train.")
    return data.take(np.flatnonzero(mask)), data.take(np.flatnonzero(~mask))


def stratified_holdout(
    data: Dataset, fraction: float, seed: int = 42
) -> tuple[np.ndarray, np.ndarray]:
    """Row indices `(kept, held)` of a holdout inside a training split.

    Each class gives `floor(n_c * fraction)` of its rows to `held` and
    always keeps at least one, so a class too small to share stays whole
    and every class seen in `data` is still seen by a model fitted on
    `kept`. Both index arrays are sorted.

    Examples:
        >>> from kmanb_toolkit.dataset.profile import DeviceProfile
        >>> p = DeviceProfile(
        ...     device="toy",
        ...     features=[{"name": "x", "kind": "numeric"}],
        ...     attack_types=["ddos"],
        ... )
        >>> d = Dataset.from_columns(
        ...     p, {"x": range(11)}, ["normal"] * 10 + ["ddos"]
        ... )
        >>> kept, held = stratified_holdout(d, 0.2, seed=1)
        >>> len(kept), len(held), 10 in kept
        (9, 2, True)
    """
    if not 0 < fraction < 1:
        raise DataError(f"{fraction=} must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    types = data.attack_types
    held: list[np.ndarray] = []
    for cls in data.profile.classes:
        members = np.flatnonzero(types == cls)
        n_held = min(int(members.size * fraction), members.size - 1)
        if n_held > 0:
            held.append(rng.choice(members, size=n_held, replace=False))
    mask = np.zeros(len(data), dtype=bool)
    if held:
        mask[np.concatenate(held)] = True
    return np.flatnonzero(~mask), np.flatnonzero(mask)
