from .encode import Encoder, decode, encode, fit_encoder
from .split import dev_test_split, split
from .synth import SynthConfig, default_schema, synth_generate
from .table import DataError, FeatureSpec, FlowTable, Reject, Schema, load_csv, parse_csv, write_csv
from .trigger import TriggerSpec, apply_trigger, inject_trigger

__all__ = [
    "DataError", "Encoder", "FeatureSpec", "FlowTable", "Reject", "Schema", "SynthConfig", "TriggerSpec",
    "apply_trigger", "decode", "default_schema", "dev_test_split", "encode", "fit_encoder",
    "inject_trigger", "load_csv", "parse_csv", "split", "synth_generate", "write_csv",
]
