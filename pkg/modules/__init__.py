"""
Negative Space Modules
Density-separated slicing of mixed-type tabular feature spaces
"""

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Domain",
    "FeatureKind",
    "FeatureSchema",
    "Slice",
    "Subset",
    "PartitionConfig",
    "PartitionModel",
    "ProxySettings",
    "UniformityReport",
    "ViolationCandidate",
    "build_partition",
    "conditioned_partition",
    "screen_positivity",
    "remove_slices",
    "uniformity_statistic",
    "read_table",
    "load_schema",
    "load_partition",
    "save_partition",
    "render_svg",
]

_LAZY_IMPORTS: dict[str, tuple[str, str]] = {
    "Dataset": (".feature_model", "Dataset"),
    "Domain": (".feature_model", "Domain"),
    "FeatureKind": (".feature_model", "FeatureKind"),
    "FeatureSchema": (".feature_model", "FeatureSchema"),
    "Slice": (".slice_geometry", "Slice"),
    "Subset": (".slice_geometry", "Subset"),
    "PartitionConfig": (".tree_partitioner", "PartitionConfig"),
    "PartitionModel": (".tree_partitioner", "PartitionModel"),
    "ProxySettings": (".density_proxy", "ProxySettings"),
    "UniformityReport": (".uniformity_metrics", "UniformityReport"),
    "ViolationCandidate": (".positivity_screen", "ViolationCandidate"),
    "build_partition": (".tree_partitioner", "build_partition"),
    "conditioned_partition": (".tree_partitioner", "conditioned_partition"),
    "screen_positivity": (".positivity_screen", "screen_positivity"),
    "remove_slices": (".positivity_screen", "remove_slices"),
    "uniformity_statistic": (".uniformity_metrics", "uniformity_statistic"),
    "read_table": (".dataset_io", "read_table"),
    "load_schema": (".dataset_io", "load_schema"),
    "load_partition": (".partition_store", "load_partition"),
    "save_partition": (".partition_store", "save_partition"),
    "render_svg": (".slice_render", "render_svg"),
}


def __getattr__(name: str):
    if name in _LAZY_IMPORTS:
        module_path, attr = _LAZY_IMPORTS[name]
        from importlib import import_module

        module = import_module(module_path, __package__)
        value = getattr(module, attr)
        globals()[name] = value  # cache for subsequent access
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
