from .devices import (
    DeviceSpec,
    FeatureSpec,
    Scale,
    SynthHint,
    device_counts,
    device_spec,
    get_devices_file,
    list_devices,
    load_device,
)
from .loader import format_seconds, load_csv, parse_seconds, write_csv
from .normalize import (
    FeatureBounds,
    NormalizationParams,
    normalize_apply,
    normalize_fit,
)
from .profile import (
    LABEL_COLUMN,
    NORMAL,
    TYPE_COLUMN,
    DeviceProfile,
    FeatureKind,
    FeatureSchema,
    fold_name,
)
from .records import Dataset, Instance, Label, Target
from .split import stratified_holdout, stratified_split
from .synth import DateMode, synthesize, synthesize_device
