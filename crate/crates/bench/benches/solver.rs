use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pose_ik_core::chain::RobotDefinition;
use pose_ik_core::constraints::{
    admissible_set, extract_human_pose, map_to_robot, project_into_set, SofteningFactor,
};
use pose_ik_core::geom::{project_into_octant, OctantId, Vec3};
use pose_ik_core::ingest::{exponential_smooth, synth_demo, to_robot_frame, TaskLabel};
use pose_ik_core::solver::{solve, solve_trajectory, SolverConfig, SolverMode};
use std::hint::black_box;

fn test_robot() -> RobotDefinition {
    let text = include_str!("../../../data/robots/baxter.json");
    RobotDefinition::from_json(text).expect("robot definition parses")
}

fn projection(c: &mut Criterion) {
    let v = Vec3::new(-0.3, 0.8, -0.52);
    let octant = OctantId::from_index(1).unwrap();
    c.bench_function("project_into_octant", |b| {
        b.iter(|| project_into_octant(black_box(v), black_box(octant)))
    });
    let set = admissible_set(octant, SofteningFactor::new(1).unwrap());
    c.bench_function("project_into_set_eta1", |b| {
        b.iter(|| project_into_set(black_box(v), black_box(set)))
    });
}

fn single_solve(c: &mut Criterion) {
    let def = test_robot();
    let chain = def.rest_chain().unwrap();
    let target = Vec3::new(-4.0, 38.0, 10.0);
    let human = extract_human_pose(
        Vec3::new(0.0, 10.0, 38.0),
        Vec3::new(18.0, 16.0, 16.0),
        Vec3::new(-4.0, 38.0, 10.0),
    )
    .unwrap();
    let constraints = map_to_robot(&human, &def).unwrap();

    let mut group = c.benchmark_group("cold_solve_7_joints");
    for mode in [SolverMode::Fabrik, SolverMode::Pic, SolverMode::Pics] {
        let cfg = SolverConfig {
            mode,
            eta: SofteningFactor::new(2).unwrap(),
            ..SolverConfig::fabrik()
        };
        group.bench_with_input(BenchmarkId::from_parameter(mode), &cfg, |b, cfg| {
            b.iter(|| {
                solve(
                    black_box(&chain),
                    black_box(target),
                    black_box(Some(&constraints)),
                    cfg,
                )
            })
        });
    }
    group.finish();
}

fn trajectory_solve(c: &mut Criterion) {
    let def = test_robot();
    let demo = synth_demo(TaskLabel::IncisionCurve, 120, 42).unwrap();
    let smoothed = exponential_smooth(&demo, 0.3).unwrap();
    let retargeted = to_robot_frame(&smoothed, def.transform.as_ref().unwrap());
    let targets: Vec<Vec3> = retargeted.wrists();
    let constraints: Vec<_> = retargeted
        .frames()
        .iter()
        .map(|f| {
            let human = extract_human_pose(f.shoulder, f.elbow, f.wrist).unwrap();
            map_to_robot(&human, &def).unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("warm_trajectory_120_frames");
    for mode in [SolverMode::Fabrik, SolverMode::Pic] {
        let cfg = SolverConfig {
            mode,
            ..SolverConfig::fabrik()
        };
        group.bench_with_input(BenchmarkId::from_parameter(mode), &cfg, |b, cfg| {
            b.iter(|| {
                solve_trajectory(
                    black_box(&def),
                    black_box(&targets),
                    black_box(Some(&constraints)),
                    cfg,
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, projection, single_solve, trajectory_solve);
criterion_main!(benches);
