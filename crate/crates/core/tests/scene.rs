use procgen::math::{Aabb, Vec3};
use procgen::mesh::Mesh;
use procgen::rng::RandomStream;
use procgen::scene::*;
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::time::Instant;

fn room(windows: Vec<WindowRect>) -> RoomSpec {
    RoomSpec { width: 4.0, depth: 3.0, height: 2.5, quad_size: 0.5, windows }
}

fn total_area(m: &Mesh) -> f64 {
    (0..m.face_count()).map(|f| m.face_area(f)).sum()
}

#[test]
fn room_without_windows_is_a_quad_grid() {
    let r = room(vec![]);
    let m = make_room(&r).unwrap();
    assert!(m.is_quad_only());
    // floor and ceiling 8×6, walls 8×5 and 6×5 twice each
    assert_eq!(m.face_count(), 2 * 48 + 2 * 40 + 2 * 30);
    let want = 2.0 * (4.0 * 3.0) + 2.0 * 2.5 * (4.0 + 3.0);
    assert!((total_area(&m) - want).abs() < 1e-9);
}

#[test]
fn window_holes_remove_exactly_their_area() {
    let windows = vec![
        WindowRect { wall: 0, u0: 0.7, v0: 0.9, u1: 1.85, v1: 2.05 },
        WindowRect { wall: 0, u0: 2.2, v0: 1.0, u1: 3.3, v1: 1.9 },
        WindowRect { wall: 3, u0: 1.0, v0: 0.0, u1: 1.9, v1: 2.1 },
    ];
    let full = make_room_panels(&room(vec![])).unwrap();
    let cut = make_room_panels(&room(windows.clone())).unwrap();
    let area = |ms: &[Mesh]| ms.iter().map(total_area).sum::<f64>();
    let holes: f64 = windows.iter().map(WindowRect::area).sum();
    assert!((area(&full) - area(&cut) - holes).abs() < 1e-9);
    for p in &cut {
        assert!(p.is_quad_only());
        p.check_indices().unwrap();
        // every face faces the room centre
        for f in 0..p.face_count() {
            let c = p.faces[f].iter().fold(Vec3::ZERO, |a, &i| a + p.vertices[i as usize]) / 4.0;
            assert!(p.face_normal(f).dot(Vec3::new(2.0, 1.5, 1.25) - c) > 0.0);
        }
    }
    // no vertex of wall 0 lies strictly inside a window
    for v in &cut[2].vertices {
        for w in &windows[..2] {
            assert!(!(v.x > w.u0 && v.x < w.u1 && v.z > w.v0 && v.z < w.v1));
        }
    }
}

#[test]
fn bad_windows_are_rejected() {
    let w = |wall, u0, u1| WindowRect { wall, u0, v0: 1.0, u1, v1: 2.0 };
    assert!(matches!(make_room(&room(vec![w(0, 1.0, 2.0), w(0, 1.5, 2.5)])), Err(SceneError::OverlappingWindows(0, 1))));
    assert!(matches!(make_room(&room(vec![w(1, 2.0, 3.5)])), Err(SceneError::WindowOutOfBounds(0))));
    assert!(make_room(&room(vec![w(0, 1.0, 2.0), w(1, 1.0, 2.0)])).is_ok());
}

// ---------------------------------------------------------------------------
// Collision

fn segment_hits_triangle(p: Vec3, q: Vec3, t: &[Vec3; 3]) -> bool {
    let n = (t[1] - t[0]).cross(t[2] - t[0]);
    let (dp, dq) = (n.dot(p - t[0]), n.dot(q - t[0]));
    if dp * dq >= 0.0 {
        return false;
    }
    let x = p + (q - p) * (dp / (dp - dq));
    (0..3).all(|k| (t[(k + 1) % 3] - t[k]).cross(x - t[k]).dot(n) > 0.0)
}

/// Two triangles in general position intersect iff an edge of one pierces
/// the other.
fn edge_oracle(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    let pierce = |x: &[Vec3; 3], y: &[Vec3; 3]| (0..3).any(|k| segment_hits_triangle(x[k], x[(k + 1) % 3], y));
    pierce(a, b) || pierce(b, a)
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn tri_tri_matches_edge_oracle(a in [vec3(), vec3(), vec3()], b in [vec3(), vec3(), vec3()]) {
        let got = tri_tri_intersect(&a, &b);
        prop_assert_eq!(got, edge_oracle(&a, &b));
        prop_assert_eq!(got, tri_tri_intersect(&b, &a));
        let c = [a[1], a[2], a[0]];
        prop_assert_eq!(got, tri_tri_intersect(&c, &b));
    }
}

fn brute_force(sc: &Scene) -> BTreeSet<(usize, usize)> {
    let tris: Vec<Vec<[Vec3; 3]>> = (0..sc.objects.len())
        .map(|i| {
            let m = sc.world_mesh(i);
            m.triangles().iter().map(|t| t.map(|k| m.vertices[k as usize])).collect()
        })
        .collect();
    let mut out = BTreeSet::new();
    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            if tris[i].iter().any(|a| tris[j].iter().any(|b| tri_tri_intersect(a, b))) {
                out.insert((i, j));
            }
        }
    }
    out
}

fn random_scene(seed: u64) -> Scene {
    let mut s = RandomStream::new(seed);
    let mut sc = Scene::new(seed);
    let meshes = [
        sc.add_mesh(MeshSource::Box { size: [1.0, 0.6, 0.8], subdiv: 2 }).unwrap(),
        sc.add_mesh(MeshSource::Box { size: [0.3, 0.3, 1.2], subdiv: 1 }).unwrap(),
        sc.add_mesh(MeshSource::Cylinder { radius: 0.3, height: 0.9, segments: 12 }).unwrap(),
    ];
    let n = 4 + s.randint(6).unwrap() as usize;
    for _ in 0..n {
        let m = meshes[s.randint(3).unwrap() as usize];
        let t = Transform::new(
            Vec3::new(s.uniform(0.0, 3.0).unwrap(), s.uniform(0.0, 3.0).unwrap(), s.uniform(0.0, 0.5).unwrap()),
            s.uniform(0.0, 6.3).unwrap(),
            s.uniform(0.6, 1.4).unwrap(),
        );
        sc.add_object(m, t, &["thing"]);
    }
    sc
}

#[test]
fn collisions_match_brute_force_on_random_scenes() {
    let start = Instant::now();
    let mut colliding = 0;
    for seed in 0..200 {
        let sc = random_scene(seed);
        let got = sc.all_collisions();
        assert_eq!(got, brute_force(&sc), "seed {seed}");
        colliding += !got.is_empty() as usize;
    }
    assert!(colliding > 20 && colliding < 200, "{colliding}");
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn shared_meshes_share_one_collider() {
    let mut sc = Scene::new(0);
    let chair = sc.add_mesh(MeshSource::Box { size: [0.5, 0.5, 0.9], subdiv: 2 }).unwrap();
    for k in 0..50 {
        sc.add_object(chair, Transform::new(Vec3::new(k as f64, 0.0, 0.0), 0.0, 1.0), &["chair"]);
    }
    let again = sc.add_mesh(MeshSource::Box { size: [0.5, 0.5, 0.9], subdiv: 2 }).unwrap();
    assert_eq!(again, chair);
    assert_eq!(sc.cache().len(), 1);
    assert_eq!(sc.cache().builds(), 1);
    assert!(sc.all_collisions().is_empty());
}

fn two_cubes(dx: f64) -> Scene {
    let mut sc = Scene::new(0);
    let m = sc.add_mesh(MeshSource::Box { size: [1.0, 1.0, 1.0], subdiv: 1 }).unwrap();
    sc.add_object(m, Transform::default(), &[]);
    sc.add_object(m, Transform::new(Vec3::new(dx, 0.0, 0.0), 0.0, 1.0), &[]);
    sc
}

#[test]
fn cube_pairs() {
    assert!(two_cubes(2.0).check_collision(0).is_empty());
    assert_eq!(two_cubes(0.5).check_collision(0), vec![(0, 1)]);
    assert_eq!(two_cubes(0.5).check_collision(1), vec![(0, 1)]);
    assert!(two_cubes(1.0).check_collision(0).is_empty(), "face contact is not a collision");
    let mut sc = two_cubes(0.5);
    sc.objects[1].collider = false;
    assert!(sc.all_collisions().is_empty());
}

#[test]
fn contained_object_is_not_a_surface_collision() {
    let mut sc = Scene::new(0);
    let big = sc.add_mesh(MeshSource::Box { size: [2.0, 2.0, 2.0], subdiv: 1 }).unwrap();
    let small = sc.add_mesh(MeshSource::Box { size: [0.5, 0.5, 0.5], subdiv: 1 }).unwrap();
    sc.add_object(big, Transform::default(), &[]);
    sc.add_object(small, Transform::new(Vec3::new(0.0, 0.0, 0.5), 0.0, 1.0), &[]);
    assert!(sc.all_collisions().is_empty());
}

// ---------------------------------------------------------------------------
// Placement

fn furnished() -> (Scene, usize, usize) {
    let mut sc = Scene::new(1);
    sc.room = Some(RoomSpec { width: 5.0, depth: 4.0, height: 2.5, quad_size: 0.5, windows: vec![] });
    let sofa = sc.add_mesh(MeshSource::Box { size: [2.0, 0.9, 0.8], subdiv: 1 }).unwrap();
    let table = sc.add_mesh(MeshSource::Box { size: [0.8, 0.6, 0.5], subdiv: 1 }).unwrap();
    let s = sc.add_object(sofa, Transform::new(Vec3::new(2.5, 2.0, 0.0), 0.3, 1.0), &["sofa"]);
    let t = sc.add_object(table, Transform::new(Vec3::new(1.0, 1.0, 0.0), 0.0, 1.0), &["table"]);
    (sc, s, t)
}

#[test]
fn back_to_wall_faces_inward_at_gap() {
    let (mut sc, s, _) = furnished();
    let room = sc.room.clone().unwrap();
    for wall in 0..4 {
        let t = sc.align(s, &Relation::BackTo { wall }, 0.1).unwrap();
        sc.objects[s].transform = t;
        let (origin, _, _, n) = wall_frame(&room, wall);
        let b = sc.world_aabb(s);
        let nearest = b.corners().iter().map(|&c| n.dot(c - origin)).fold(f64::INFINITY, f64::min);
        assert!((nearest - 0.1).abs() < 1e-9, "wall {wall}: {nearest}");
        // local +y (the front) points along the inward normal
        assert!(t.apply_dir(Vec3::new(0.0, 1.0, 0.0)).distance(n) < 1e-12);
    }
}

#[test]
fn side_of_and_on_top_of() {
    let (mut sc, s, t) = furnished();
    sc.objects[s].transform = sc.align(s, &Relation::BackTo { wall: 0 }, 0.0).unwrap();
    sc.objects[t].transform = sc.objects[s].transform;
    let moved = sc.align(t, &Relation::SideOf { target: s, side: Side::Right }, 0.2).unwrap();
    sc.objects[t].transform = moved;
    let (a, b) = (sc.world_aabb(s), sc.world_aabb(t));
    assert!((b.min.x - a.max.x - 0.2).abs() < 1e-9);
    assert!((b.center().y - a.center().y).abs() < 1e-9);
    let vase = sc.add_mesh(MeshSource::Cylinder { radius: 0.1, height: 0.3, segments: 12 }).unwrap();
    let v = sc.add_object(vase, Transform::new(b.center(), 0.0, 1.0), &["vase"]);
    sc.objects[v].transform = sc.align(v, &Relation::OnTopOf { target: t }, 0.0).unwrap();
    assert!((sc.world_aabb(v).min.z - b.max.z).abs() < 1e-12);
    assert!(sc.all_collisions().is_empty());
}

#[test]
fn impossible_side_placement_is_reported() {
    let (mut sc, s, t) = furnished();
    sc.objects[t].transform = sc.objects[s].transform;
    let r = sc.align(t, &Relation::SideOf { target: s, side: Side::Left }, -0.5);
    assert!(matches!(r, Err(SceneError::NoFeasiblePlacement(_))), "{r:?}");
}

// ---------------------------------------------------------------------------
// Planning

fn empty_world() -> BoxWorld {
    BoxWorld { bounds: Aabb::new(Vec3::ZERO, Vec3::new(5.0, 4.0, 2.5)), obstacles: vec![] }
}

#[test]
fn rrt_in_an_empty_room_is_near_straight() {
    let world = empty_world();
    let (a, b) = (Vec3::new(0.5, 0.5, 1.0), Vec3::new(4.5, 3.5, 1.5));
    let params = RrtParams { max_iters: 1500, ..RrtParams::default() };
    let good = (0..100)
        .filter(|&seed| {
            let r = rrt_star(a, b, &world, &params, &mut RandomStream::new(seed)).unwrap();
            assert_eq!(r.path[0], a);
            assert_eq!(*r.path.last().unwrap(), b);
            let len: f64 = r.path.windows(2).map(|w| w[0].distance(w[1])).sum();
            assert!((len - r.cost).abs() < 1e-9);
            r.cost <= 1.1 * a.distance(b)
        })
        .count();
    assert!(good >= 95, "{good}");
}

fn doorway_world() -> BoxWorld {
    // wall at x ∈ [2.4, 2.6] with an opening y ∈ [1.5, 2.5], z ∈ [0, 2]
    BoxWorld {
        bounds: Aabb::new(Vec3::ZERO, Vec3::new(5.0, 4.0, 2.5)),
        obstacles: vec![
            Aabb::new(Vec3::new(2.4, 0.0, 0.0), Vec3::new(2.6, 1.5, 2.5)),
            Aabb::new(Vec3::new(2.4, 2.5, 0.0), Vec3::new(2.6, 4.0, 2.5)),
            Aabb::new(Vec3::new(2.4, 1.5, 2.0), Vec3::new(2.6, 2.5, 2.5)),
        ],
    }
}

#[test]
fn rrt_goes_through_the_doorway() {
    let world = doorway_world();
    let (a, b) = (Vec3::new(0.5, 0.5, 1.0), Vec3::new(4.5, 3.5, 1.0));
    let params = RrtParams::default();
    for seed in 0..10 {
        let r = rrt_star(a, b, &world, &params, &mut RandomStream::new(seed)).unwrap();
        for w in r.path.windows(2) {
            assert!(world.segment_free(w[0], w[1]));
            assert!(world.segment_free_dense(w[0], w[1], params.step / 10.0));
            if (w[0].x - 2.5) * (w[1].x - 2.5) <= 0.0 && w[0].x != w[1].x {
                let p = w[0].lerp(w[1], (2.5 - w[0].x) / (w[1].x - w[0].x));
                assert!(p.y > 1.5 && p.y < 2.5 && p.z < 2.0, "crossing at {p:?}");
            }
        }
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.cost_trace.last().copied(), Some(r.cost));
    }
}

#[test]
fn rrt_edge_cases() {
    let world = doorway_world();
    let p = Vec3::new(1.0, 1.0, 1.0);
    let r = rrt_star(p, p, &world, &RrtParams::default(), &mut RandomStream::new(0)).unwrap();
    assert_eq!((r.path, r.cost), (vec![p], 0.0));
    let inside = Vec3::new(2.5, 0.5, 1.0);
    assert!(matches!(rrt_star(inside, p, &world, &RrtParams::default(), &mut RandomStream::new(0)), Err(SceneError::Blocked("start"))));
    let sealed = BoxWorld {
        bounds: world.bounds,
        obstacles: vec![Aabb::new(Vec3::new(2.4, 0.0, 0.0), Vec3::new(2.6, 4.0, 2.5))],
    };
    let params = RrtParams { max_iters: 300, ..RrtParams::default() };
    let r = rrt_star(p, Vec3::new(4.0, 3.0, 1.0), &sealed, &params, &mut RandomStream::new(0));
    assert!(matches!(r, Err(SceneError::NoPathFound(300))));
}

#[test]
fn rrt_is_deterministic() {
    let world = doorway_world();
    let run = || rrt_star(Vec3::new(0.5, 0.5, 1.0), Vec3::new(4.5, 3.5, 1.0), &world, &RrtParams::default(), &mut RandomStream::new(7)).unwrap();
    assert_eq!(run(), run());
}

// ---------------------------------------------------------------------------
// Cameras and rooms

#[test]
fn camera_rays_have_unit_forward_component() {
    let cam = CameraSpec::new(Vec3::new(1.0, 2.0, 1.5), Vec3::new(3.0, 1.0, 1.0), DEFAULT_FOV, 64, 48);
    let (r, d, f) = cam.basis();
    assert!(r.dot(d).abs() < 1e-12 && r.dot(f).abs() < 1e-12 && d.dot(f).abs() < 1e-12);
    assert!(d.z < 0.0, "image down points down");
    for (x, y) in [(0, 0), (63, 47), (31, 20)] {
        assert!((cam.ray(x, y).1.dot(f) - 1.0).abs() < 1e-12);
    }
    let straight_down = CameraSpec::new(Vec3::new(0.0, 0.0, 2.0), Vec3::ZERO, DEFAULT_FOV, 8, 8);
    assert!(straight_down.basis().0.is_finite());
    assert!(CameraSpec::new(Vec3::ZERO, Vec3::ZERO, 1.0, 8, 8).validate().is_err());
}

#[test]
fn rigs() {
    let ring = circular_rig(Vec3::new(0.0, 0.0, 1.0), 2.0, 4, Vec3::new(0.0, 0.0, 1.0), DEFAULT_FOV, 32);
    assert!(ring[1].position.distance(Vec3::new(0.0, 2.0, 1.0)) < 1e-12);
    let world = doorway_world();
    let mut s = RandomStream::new(3);
    let cams = random_cameras(&mut s, &world.bounds, 5, Some(0.1), &world, DEFAULT_FOV, 32).unwrap();
    assert_eq!(cams.len(), 10);
    for pair in cams.chunks(2) {
        assert!(pair.iter().all(|c| world.point_free(c.position)));
        assert!((pair[0].position.distance(pair[1].position) - 0.1).abs() < 1e-12);
        assert!(pair[1].position.distance(pair[0].position + pair[0].basis().0 * 0.1) < 1e-12);
    }
    let blocked = BoxWorld { bounds: world.bounds, obstacles: vec![world.bounds] };
    assert!(matches!(random_cameras(&mut s, &world.bounds, 1, None, &blocked, DEFAULT_FOV, 32), Err(SceneError::PlacementExhausted)));
    let path = [Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
    let cams = path_to_cameras(&path, 0.5, 0.25, DEFAULT_FOV, 32).unwrap();
    assert_eq!(cams.len(), 5);
    assert!(cams[3].position.distance(Vec3::new(1.0, 0.5, 0.0)) < 1e-12);
    assert!(cams[4].look_at.distance(Vec3::new(1.0, 1.25, 0.0)) < 1e-12);
}

#[test]
fn sampled_rooms_are_valid_and_reproducible() {
    let params = RoomParams { quad_size: 0.1, cameras: 6, ..RoomParams::default() };
    for seed in 0..4 {
        let sc = sample_room(seed, &params).unwrap();
        assert!(sc.all_collisions().is_empty(), "seed {seed}");
        assert!(sc.objects.iter().filter(|o| o.collider).count() >= 4);
        assert_eq!(sc.cameras.len(), 6);
        let world = sc.box_world(None, 0.3);
        assert!(sc.cameras.iter().all(|c| world.point_free(c.position)));
        let json = sc.to_json();
        assert_eq!(sample_room(seed, &params).unwrap().to_json(), json);
        let back = Scene::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        for (a, b) in back.meshes.iter().zip(&sc.meshes) {
            assert_eq!(a.content_hash(), b.content_hash());
        }
    }
    assert!(Scene::from_json("{").is_err());
}

#[test]
fn room_raycast_hits_the_floor() {
    let mut sc = Scene::new(0);
    let r = room(vec![]);
    sc.room = Some(r.clone());
    for p in 0..6 {
        let m = sc.add_mesh(MeshSource::RoomPanel { room: r.clone(), panel: p, material: None }).unwrap();
        sc.add_object(m, Transform::default(), &["room"]);
    }
    let (t, n) = sc.raycast(Vec3::new(1.3, 1.1, 1.0), Vec3::new(0.0, 0.0, -1.0), f64::INFINITY).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    assert!(n.z.abs() > 1.0 - 1e-12);
}
