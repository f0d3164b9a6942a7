//! Deterministic simulator: maze worlds, waypoint trajectories, multizone
//! range scans and drifting odometry.

mod dataset;
mod sensor;
mod sequence;
mod trajectory;
mod world;

pub use dataset::{
    load_sequence, read_binary, read_jsonl, save_sequence, write_binary, write_jsonl, BINARY_MAGIC,
};
pub use sensor::{simulate_scan, SensorNoise};
pub use sequence::{
    builtin_sequence, builtin_sequences, simulate_builtin, simulate_sequence, SequenceHeader,
    SequenceRecord, SequenceSpec, SimConfig, Tick, BUILTIN_DURATION, BUILTIN_RATE_HZ, SCHEMA_NAME,
    SCHEMA_VERSION,
};
pub use trajectory::TrajectorySpec;
pub use world::{
    builtin_world, builtin_worlds, MazeRegion, Opening, RayHit, Room, RoomMaze, Segment, World,
    EXTENDED_WORLD, PRIMARY_LAYOUT, PRIMARY_MAZE, PRIMARY_WORLD, WORLD_RESOLUTION,
};
