from .blueprints import (
    ConfigBlueprint,
    build_graph,
    default_complex_configs,
    default_simple_configs,
    topology_family,
)
from .dataset import example_to_record, read_dataset, record_to_example, write_dataset
from .oracle import (
    Always,
    HubRolePresent,
    Never,
    NodeCount,
    PathBetweenRoles,
    RuleBasedOracle,
    SuccessOracle,
    TaskSpec,
    load_task_suite,
)
from .ordering import canonical_order, find_cycle, has_path, in_canonical_order
from .synthesis import (
    assemble_efficiency,
    prune_dataset,
    prune_generated,
    prune_minimal,
    prune_variants,
    single_removals,
    synth_exploration,
    synth_simple,
)

__all__ = [
    "Always",
    "ConfigBlueprint",
    "HubRolePresent",
    "Never",
    "NodeCount",
    "PathBetweenRoles",
    "RuleBasedOracle",
    "SuccessOracle",
    "TaskSpec",
    "assemble_efficiency",
    "build_graph",
    "canonical_order",
    "default_complex_configs",
    "default_simple_configs",
    "example_to_record",
    "find_cycle",
    "has_path",
    "in_canonical_order",
    "load_task_suite",
    "prune_dataset",
    "prune_generated",
    "prune_minimal",
    "prune_variants",
    "read_dataset",
    "record_to_example",
    "single_removals",
    "synth_exploration",
    "synth_simple",
    "topology_family",
]
