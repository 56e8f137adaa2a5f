mod common;

use common::{jitter, nearest_to_centroid, object_view, shapes, templates};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtgrasp::geometry::{axis_angle, Frame, PointCloud, RigidTransform, Vec3};
use vtgrasp::perception::estimate_normals;
use vtgrasp::recognition::*;
use vtgrasp::sim::world::ShapeSpec;

fn global(c: &PointCloud, cfg: &RecognitionConfig) -> Descriptor {
    global_descriptor(c, &estimate_normals(c, cfg.normal_radius).unwrap()).unwrap()
}

fn random_motion(rng: &mut ChaCha8Rng, frame: Frame) -> RigidTransform {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let t = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    RigidTransform::new(axis_angle(&axis, rng.random_range(-3.1..3.1)), t, frame.clone(), frame)
}

#[test]
fn global_descriptor_tolerates_noise_but_separates_shapes() {
    let cfg = RecognitionConfig::default();
    let cup = object_view(&ShapeSpec::Cylinder { radius: 0.04, height: 0.1 }, 1);
    let block = object_view(&ShapeSpec::Box { size: [0.12, 0.12, 0.03] }, 1);
    let d = global(&cup, &cfg);
    assert!(d.distance(&global(&cup, &cfg)).unwrap().abs() < 1e-12);
    let noisy = d.intersection(&global(&jitter(&cup, 0.005, 3), &cfg)).unwrap();
    let other = d.intersection(&global(&block, &cfg)).unwrap();
    eprintln!("noisy self {noisy:.3} other {other:.3}");
    assert!(noisy > 0.9, "noisy self-similarity {noisy}");
    assert!(other < noisy);
}

#[test]
fn descriptors_are_invariant_to_rigid_motion() {
    let cfg = RecognitionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cloud = object_view(&ShapeSpec::Spoon, 2);
    let key = nearest_to_centroid(&cloud);
    let normals = estimate_normals(&cloud, cfg.normal_radius).unwrap();
    let local = local_descriptor(&cloud, &normals, &key, cfg.local_radius).unwrap();
    let glob = global_descriptor(&cloud, &normals).unwrap();
    for _ in 0..10 {
        let m = random_motion(&mut rng, cloud.frame().clone());
        let moved = cloud.transformed(&m).unwrap();
        let mn = estimate_normals(&moved, cfg.normal_radius).unwrap();
        let l = local_descriptor(&moved, &mn, &m.apply(&key), cfg.local_radius).unwrap();
        assert!(local.distance(&l).unwrap() < 0.05);
        assert!(glob.distance(&global_descriptor(&moved, &mn).unwrap()).unwrap() < 0.05);
    }
}

#[test]
fn empty_support_gives_zero_local_descriptor() {
    let cloud = object_view(&ShapeSpec::Ball { radius: 0.035 }, 1);
    let normals = estimate_normals(&cloud, 0.02).unwrap();
    let far = Vec3::new(5.0, 5.0, 5.0);
    let d = local_descriptor(&cloud, &normals, &far, 0.03).unwrap();
    assert!(d.is_zero());
    assert_eq!(d.bins().len(), LOCAL_BINS);
}

#[test]
fn matching_exact_empty_and_noisy_queries() {
    let cfg = RecognitionConfig::default();
    let db = templates(&cfg);
    for (i, t) in db.iter().enumerate() {
        let m = match_descriptor(&t.global, &db, cfg.match_threshold).unwrap().unwrap();
        assert_eq!(m.index, i);
        assert!((m.score - 1.0).abs() < 1e-12);
    }
    assert!(match_descriptor(&db[0].global, &[], 0.0).unwrap().is_none());

    let target = &db[2];
    let mut hits = 0;
    for seed in 0..20 {
        let q = jitter(&target.cloud, 0.005, 500 + seed);
        let r = recognize_cluster(&q, &db, &cfg).unwrap();
        hits += usize::from(r.estimate.is_some_and(|e| e.label == target.label));
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn mismatched_descriptor_kinds_are_rejected() {
    let cfg = RecognitionConfig::default();
    let db = templates(&cfg);
    let local = Descriptor::zeros(DescriptorKind::Local);
    assert!(db[0].global.intersection(&local).is_err());
}

#[test]
fn pose_follows_translation_and_yaw() {
    let cfg = RecognitionConfig::default();
    let cloud = object_view(&ShapeSpec::Spoon, 1).relabeled(Frame::OBJECT);
    let t = ObjectTemplate::build("spoon", cloud.clone(), &cfg).unwrap();
    let centroid = cloud.centroid().unwrap();

    let same = estimate_pose(&cloud, &t, 1.0).unwrap();
    assert!(same.rotation_valid);
    assert!(same.pose.rotation_angle() < 1e-3);
    assert_eq!(same.pose.translation(), &centroid);

    let shift = RigidTransform::from_translation(Vec3::new(0.2, 0.0, 0.0), Frame::OBJECT, Frame::BASE);
    let moved = estimate_pose(&cloud.transformed(&shift).unwrap(), &t, 1.0).unwrap();
    assert!((moved.pose.translation() - same.pose.translation() - Vec3::new(0.2, 0.0, 0.0)).norm() < 1e-6);

    let yaw = 30f64.to_radians();
    let about = RigidTransform::from_translation(centroid, Frame::OBJECT, Frame::BASE)
        .compose(&RigidTransform::new(axis_angle(&Vec3::z(), yaw), Vec3::zeros(), Frame::OBJECT, Frame::OBJECT))
        .unwrap()
        .compose(&RigidTransform::from_translation(-centroid, Frame::OBJECT, Frame::OBJECT))
        .unwrap();
    let turned = estimate_pose(&cloud.transformed(&about).unwrap(), &t, 0.8).unwrap();
    let err = turned.pose.rotation().angle_to(&axis_angle(&Vec3::z(), yaw));
    assert!(err.to_degrees() < 5.0, "{}", err.to_degrees());
    assert_eq!(turned.confidence, 0.8);
}

#[test]
fn degenerate_cluster_gets_position_only_pose() {
    let cfg = RecognitionConfig::default();
    let db = templates(&cfg);
    let line: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
    let c = PointCloud::new(line, Vec3::z(), Frame::BASE).unwrap();
    let e = estimate_pose(&c, &db[0], 0.9).unwrap();
    assert!(!e.rotation_valid);
    assert!(e.confidence <= LOW_CONFIDENCE);
    assert_eq!(e.pose.rotation_angle(), 0.0);
}

#[test]
fn templates_round_trip_through_disk() {
    let cfg = RecognitionConfig::default();
    let db = templates(&cfg);
    let dir = tempfile::tempdir().unwrap();
    for t in &db {
        t.save(dir.path()).unwrap();
    }
    let back = load_database(dir.path(), &cfg).unwrap();
    assert_eq!(back.len(), db.len());
    for b in &back {
        let orig = db.iter().find(|t| t.label == b.label).unwrap();
        assert_eq!(b.cloud, orig.cloud);
        assert_eq!(b.global, orig.global);
        let recomputed = global_descriptor(&b.cloud, &b.normals).unwrap();
        assert!(recomputed.distance(&b.global).unwrap().abs() < 1e-6);
        assert_eq!(b.keypoints.len(), orig.keypoints.len());
    }
    assert!(shapes().len() == back.len());
}
