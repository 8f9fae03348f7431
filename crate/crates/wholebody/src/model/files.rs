//! Loaders and savers for the robot, scene, and trajectory text formats.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::parse::{parse_f64, parse_floats, parse_pose, parse_vec3, Document, Section};
use super::{
    Aabb, CollisionShape, Configuration, FootSpec, FrameSpec, JointGroup, JointSpec, JointType,
    LinkSpec, ModelError, Obstacle, RobotModel, Scene, ShapeKind, VoxelGrid,
};
use crate::kinematics::Transform;

fn read(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), ModelError> {
    std::fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_shape(doc: &Document, sec: &Section, entry: &super::parse::Entry) -> Result<CollisionShape, ModelError> {
    let mut tokens = entry.value.split_whitespace();
    let kind = tokens.next().unwrap_or("");
    let nums: Vec<f64> = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| doc.error(entry.line, format!("'{t}' is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let shape = match (kind, nums.len()) {
        ("sphere", 1) => CollisionShape {
            kind: ShapeKind::Sphere { radius: nums[0] },
            pose: Transform::identity(),
        },
        ("capsule", 7) => CollisionShape {
            kind: ShapeKind::Capsule {
                p0: Vector3::new(nums[0], nums[1], nums[2]),
                p1: Vector3::new(nums[3], nums[4], nums[5]),
                radius: nums[6],
            },
            pose: Transform::identity(),
        },
        ("box", 9) => CollisionShape {
            kind: ShapeKind::Cuboid {
                half_extents: Vector3::new(nums[0], nums[1], nums[2]),
            },
            pose: Transform::from_parts(
                Vector3::new(nums[3], nums[4], nums[5]),
                Vector3::new(nums[6], nums[7], nums[8]),
            ),
        },
        _ => {
            return Err(doc.error(
                entry.line,
                format!(
                    "[{}] collision must be 'sphere r', 'capsule p0 p1 r', or 'box he t r'",
                    sec.name
                ),
            ))
        }
    };
    validate_shape(&shape.kind).map_err(|m| doc.error(entry.line, m))?;
    Ok(shape)
}

fn validate_shape(kind: &ShapeKind) -> Result<(), String> {
    match kind {
        ShapeKind::Sphere { radius } => {
            if *radius <= 0.0 {
                return Err("sphere radius must be positive".into());
            }
        }
        ShapeKind::Capsule { radius, .. } => {
            if *radius <= 0.0 {
                return Err("capsule radius must be positive".into());
            }
        }
        ShapeKind::Cuboid { half_extents } => {
            if half_extents.iter().any(|h| *h <= 0.0) {
                return Err("box half extents must be positive".into());
            }
        }
    }
    Ok(())
}

/// Load and validate a robot model file.
pub fn load_robot(path: impl AsRef<Path>) -> Result<RobotModel, ModelError> {
    let path = path.as_ref();
    let doc = Document::parse(&path.display().to_string(), &read(path)?)?;

    let name = doc
        .sections_named("robot")
        .next()
        .and_then(|s| s.get("name"))
        .map(|e| e.value.clone())
        .unwrap_or_else(|| "robot".to_string());

    let mut links = Vec::new();
    for sec in doc.sections_named("link") {
        let mut collision = Vec::new();
        for entry in sec.values("collision") {
            collision.push(parse_shape(&doc, sec, entry)?);
        }
        links.push(LinkSpec {
            name: sec.require(&doc, "name")?.value.clone(),
            mass: parse_f64(&doc, sec.require(&doc, "mass")?)?,
            com_offset: match sec.get("com") {
                Some(e) => parse_vec3(&doc, e)?,
                None => Vector3::zeros(),
            },
            collision,
        });
    }

    let mut joints = Vec::new();
    let mut explicit_groups: Vec<Option<JointGroup>> = Vec::new();
    for sec in doc.sections_named("joint") {
        let type_entry = sec.require(&doc, "type")?;
        let joint_type = match type_entry.value.as_str() {
            "revolute" => JointType::Revolute,
            "prismatic" => JointType::Prismatic,
            "fixed" => JointType::Fixed,
            other => {
                return Err(doc.error(type_entry.line, format!("unknown joint type '{other}'")))
            }
        };
        let axis = match sec.get("axis") {
            Some(e) => parse_vec3(&doc, e)?,
            None if joint_type == JointType::Fixed => Vector3::z(),
            None => return Err(doc.error(sec.line, "non-fixed joint is missing 'axis'")),
        };
        let (lower, upper) = if joint_type == JointType::Fixed {
            (0.0, 0.0)
        } else {
            (
                parse_f64(&doc, sec.require(&doc, "lower")?)?,
                parse_f64(&doc, sec.require(&doc, "upper")?)?,
            )
        };
        let origin = match sec.get("origin") {
            Some(e) => {
                let (t, r) = parse_pose(&doc, e)?;
                Transform::from_parts(t, r)
            }
            None => Transform::identity(),
        };
        let group = match sec.get("group") {
            Some(e) => Some(match e.value.as_str() {
                "lower_body" => JointGroup::LowerBody,
                "torso" => JointGroup::Torso,
                "arm" => JointGroup::Arm,
                other => return Err(doc.error(e.line, format!("unknown joint group '{other}'"))),
            }),
            None => None,
        };
        explicit_groups.push(group);
        joints.push(JointSpec {
            name: sec.require(&doc, "name")?.value.clone(),
            parent_link: sec.require(&doc, "parent")?.value.clone(),
            child_link: sec.require(&doc, "child")?.value.clone(),
            axis,
            joint_type,
            lower_bound: lower,
            upper_bound: upper,
            origin,
            group: group.unwrap_or(JointGroup::Torso),
        });
    }

    let mut end_effectors = Vec::new();
    for sec in doc.sections_named("endeffector") {
        end_effectors.push(parse_frame(&doc, sec)?);
    }

    let mut feet = Vec::new();
    for sec in doc.sections_named("foot") {
        let frame = parse_frame(&doc, sec)?;
        let mut corners = Vec::new();
        for entry in sec.values("corner") {
            let v = parse_floats(&doc, entry)?;
            if v.len() != 2 {
                return Err(doc.error(entry.line, "foot corner needs 2 numbers"));
            }
            corners.push([v[0], v[1]]);
        }
        feet.push(FootSpec { frame, corners });
    }

    let mut pairs = Vec::new();
    for sec in doc.sections_named("selfcollision") {
        for entry in sec.values("pair") {
            let names: Vec<&str> = entry.value.split_whitespace().collect();
            if names.len() != 2 {
                return Err(doc.error(entry.line, "pair needs two link names"));
            }
            pairs.push((names[0].to_string(), names[1].to_string()));
        }
    }

    let mut model = RobotModel::assemble(name, links, joints, end_effectors, feet, pairs)?;
    assign_default_groups(&mut model, &explicit_groups);
    Ok(model)
}

fn parse_frame(doc: &Document, sec: &Section) -> Result<FrameSpec, ModelError> {
    let offset = match sec.get("offset") {
        Some(e) => {
            let (t, r) = parse_pose(doc, e)?;
            Transform::from_parts(t, r)
        }
        None => Transform::identity(),
    };
    Ok(FrameSpec {
        name: sec.require(doc, "name")?.value.clone(),
        link: sec.require(doc, "link")?.value.clone(),
        offset,
    })
}

/// Joints without an explicit group default by chain membership: joints
/// driving a foot are lower-body, remaining joints driving an end-effector
/// are arm, anything else is torso.
fn assign_default_groups(model: &mut RobotModel, explicit: &[Option<JointGroup>]) {
    let mut on_foot_chain = vec![false; model.joints.len()];
    for foot in &model.feet {
        let link = model.link_index(&foot.frame.link).unwrap();
        for &j in model.chain_joints(link) {
            on_foot_chain[j] = true;
        }
    }
    let mut on_ee_chain = vec![false; model.joints.len()];
    for ee in &model.end_effectors {
        let link = model.link_index(&ee.link).unwrap();
        for &j in model.chain_joints(link) {
            on_ee_chain[j] = true;
        }
    }
    for j in 0..model.joints.len() {
        if explicit.get(j).copied().flatten().is_some() {
            continue;
        }
        model.joints[j].group = if on_foot_chain[j] {
            JointGroup::LowerBody
        } else if on_ee_chain[j] {
            JointGroup::Arm
        } else {
            JointGroup::Torso
        };
    }
}

/// Load and validate a scene file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, ModelError> {
    let path = path.as_ref();
    let doc = Document::parse(&path.display().to_string(), &read(path)?)?;

    let mut obstacles = Vec::new();
    for sec in doc.sections_named("obstacle") {
        let kind_entry = sec.require(&doc, "kind")?;
        let kind = match kind_entry.value.as_str() {
            "sphere" => ShapeKind::Sphere {
                radius: parse_f64(&doc, sec.require(&doc, "radius")?)?,
            },
            "capsule" => ShapeKind::Capsule {
                p0: parse_vec3(&doc, sec.require(&doc, "p0")?)?,
                p1: parse_vec3(&doc, sec.require(&doc, "p1")?)?,
                radius: parse_f64(&doc, sec.require(&doc, "radius")?)?,
            },
            "box" => ShapeKind::Cuboid {
                half_extents: parse_vec3(&doc, sec.require(&doc, "halfextents")?)?,
            },
            other => {
                return Err(doc.error(kind_entry.line, format!("unknown obstacle kind '{other}'")))
            }
        };
        validate_shape(&kind).map_err(|m| doc.error(sec.line, m))?;
        let (translation, rotvec) = match sec.get("pose") {
            Some(e) => parse_pose(&doc, e)?,
            None => (Vector3::zeros(), Vector3::zeros()),
        };
        obstacles.push(Obstacle {
            name: sec
                .get("name")
                .map(|e| e.value.clone())
                .unwrap_or_else(|| format!("obstacle_{}", obstacles.len())),
            kind,
            translation,
            rotvec,
        });
    }

    let mut voxel_grid = None;
    if let Some(sec) = doc.sections_named("voxels").next() {
        let resolution = parse_f64(&doc, sec.require(&doc, "resolution")?)?;
        if resolution <= 0.0 {
            return Err(doc.error(sec.line, "voxel resolution must be positive"));
        }
        let origin = parse_vec3(&doc, sec.require(&doc, "origin")?)?;
        let mut cells = std::collections::BTreeSet::new();
        for entry in sec.values("cell") {
            let v: Vec<i64> = entry
                .value
                .split_whitespace()
                .map(|t| {
                    t.parse::<i64>()
                        .map_err(|_| doc.error(entry.line, format!("'{t}' is not an integer")))
                })
                .collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err(doc.error(entry.line, "cell needs 3 indices"));
            }
            cells.insert((v[0], v[1], v[2]));
        }
        voxel_grid = Some(VoxelGrid {
            origin,
            resolution,
            cells,
        });
    }

    let roi_sec = doc
        .sections_named("roi")
        .next()
        .ok_or_else(|| doc.error(0, "scene is missing the [roi] section"))?;
    let region_of_interest = Aabb {
        min: parse_vec3(&doc, roi_sec.require(&doc, "min")?)?,
        max: parse_vec3(&doc, roi_sec.require(&doc, "max")?)?,
    };

    let scene = Scene {
        obstacles,
        voxel_grid,
        region_of_interest,
    };
    scene.validate()?;
    Ok(scene)
}

fn fmt_vec3(v: &Vector3<f64>) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

/// Serialize a scene; obstacle poses re-emit the exact values they were
/// loaded with.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut out = String::new();
    for obs in &scene.obstacles {
        writeln!(out, "[obstacle]").unwrap();
        writeln!(out, "name = {}", obs.name).unwrap();
        match &obs.kind {
            ShapeKind::Sphere { radius } => {
                writeln!(out, "kind = sphere").unwrap();
                writeln!(out, "radius = {radius}").unwrap();
            }
            ShapeKind::Capsule { p0, p1, radius } => {
                writeln!(out, "kind = capsule").unwrap();
                writeln!(out, "p0 = {}", fmt_vec3(p0)).unwrap();
                writeln!(out, "p1 = {}", fmt_vec3(p1)).unwrap();
                writeln!(out, "radius = {radius}").unwrap();
            }
            ShapeKind::Cuboid { half_extents } => {
                writeln!(out, "kind = box").unwrap();
                writeln!(out, "halfextents = {}", fmt_vec3(half_extents)).unwrap();
            }
        }
        writeln!(
            out,
            "pose = {} {}",
            fmt_vec3(&obs.translation),
            fmt_vec3(&obs.rotvec)
        )
        .unwrap();
        writeln!(out).unwrap();
    }
    if let Some(grid) = &scene.voxel_grid {
        writeln!(out, "[voxels]").unwrap();
        writeln!(out, "origin = {}", fmt_vec3(&grid.origin)).unwrap();
        writeln!(out, "resolution = {}", grid.resolution).unwrap();
        for (i, j, k) in &grid.cells {
            writeln!(out, "cell = {i} {j} {k}").unwrap();
        }
        writeln!(out).unwrap();
    }
    writeln!(out, "[roi]").unwrap();
    writeln!(out, "min = {}", fmt_vec3(&scene.region_of_interest.min)).unwrap();
    writeln!(out, "max = {}", fmt_vec3(&scene.region_of_interest.max)).unwrap();
    write(path.as_ref(), &out)
}

/// Serialize a robot model back to the text format.
pub fn save_robot(model: &RobotModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut out = String::new();
    writeln!(out, "[robot]\nname = {}\n", model.name).unwrap();
    for link in &model.links {
        writeln!(out, "[link]").unwrap();
        writeln!(out, "name = {}", link.name).unwrap();
        writeln!(out, "mass = {}", link.mass).unwrap();
        writeln!(out, "com = {}", fmt_vec3(&link.com_offset)).unwrap();
        for shape in &link.collision {
            match &shape.kind {
                ShapeKind::Sphere { radius } => {
                    writeln!(out, "collision = sphere {radius}").unwrap()
                }
                ShapeKind::Capsule { p0, p1, radius } => writeln!(
                    out,
                    "collision = capsule {} {} {radius}",
                    fmt_vec3(p0),
                    fmt_vec3(p1)
                )
                .unwrap(),
                ShapeKind::Cuboid { half_extents } => writeln!(
                    out,
                    "collision = box {} {} {}",
                    fmt_vec3(half_extents),
                    fmt_vec3(&shape.pose.translation),
                    fmt_vec3(&shape.pose.rotvec())
                )
                .unwrap(),
            }
        }
        writeln!(out).unwrap();
    }
    for joint in &model.joints {
        writeln!(out, "[joint]").unwrap();
        writeln!(out, "name = {}", joint.name).unwrap();
        writeln!(out, "parent = {}", joint.parent_link).unwrap();
        writeln!(out, "child = {}", joint.child_link).unwrap();
        let type_name = match joint.joint_type {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        };
        writeln!(out, "type = {type_name}").unwrap();
        if joint.joint_type != JointType::Fixed {
            writeln!(out, "axis = {}", fmt_vec3(&joint.axis)).unwrap();
            writeln!(out, "lower = {}", joint.lower_bound).unwrap();
            writeln!(out, "upper = {}", joint.upper_bound).unwrap();
        }
        writeln!(
            out,
            "origin = {} {}",
            fmt_vec3(&joint.origin.translation),
            fmt_vec3(&joint.origin.rotvec())
        )
        .unwrap();
        let group = match joint.group {
            JointGroup::LowerBody => "lower_body",
            JointGroup::Torso => "torso",
            JointGroup::Arm => "arm",
        };
        writeln!(out, "group = {group}").unwrap();
        writeln!(out).unwrap();
    }
    for ee in &model.end_effectors {
        writeln!(out, "[endeffector]").unwrap();
        writeln!(out, "name = {}", ee.name).unwrap();
        writeln!(out, "link = {}", ee.link).unwrap();
        writeln!(
            out,
            "offset = {} {}",
            fmt_vec3(&ee.offset.translation),
            fmt_vec3(&ee.offset.rotvec())
        )
        .unwrap();
        writeln!(out).unwrap();
    }
    for foot in &model.feet {
        writeln!(out, "[foot]").unwrap();
        writeln!(out, "name = {}", foot.frame.name).unwrap();
        writeln!(out, "link = {}", foot.frame.link).unwrap();
        writeln!(
            out,
            "offset = {} {}",
            fmt_vec3(&foot.frame.offset.translation),
            fmt_vec3(&foot.frame.offset.rotvec())
        )
        .unwrap();
        for c in &foot.corners {
            writeln!(out, "corner = {} {}", c[0], c[1]).unwrap();
        }
        writeln!(out).unwrap();
    }
    if !model.self_collision_pairs.is_empty() {
        writeln!(out, "[selfcollision]").unwrap();
        for &(a, b) in &model.self_collision_pairs {
            writeln!(out, "pair = {} {}", model.links[a].name, model.links[b].name).unwrap();
        }
    }
    write(path.as_ref(), &out)
}

/// Write a trajectory: a `dim` header then one whitespace-separated decimal
/// row per waypoint. Floats are emitted in shortest round-trip form, so a
/// reload recovers the exact values.
pub fn save_trajectory(traj: &[Configuration], path: impl AsRef<Path>) -> Result<(), ModelError> {
    if traj.is_empty() {
        return Err(ModelError::Validation("trajectory is empty".into()));
    }
    let dim = traj[0].dim();
    let mut out = String::new();
    writeln!(out, "dim = {dim}").unwrap();
    for (i, q) in traj.iter().enumerate() {
        if q.dim() != dim {
            return Err(ModelError::Validation(format!(
                "waypoint {i} has dimension {} but the trajectory is {dim}-dimensional",
                q.dim()
            )));
        }
        let row: Vec<String> = q.0.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    write(path.as_ref(), &out)
}

/// Inverse of [`save_trajectory`].
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<Configuration>, ModelError> {
    let path = path.as_ref();
    let text = read(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| ModelError::Parse {
        path: display.clone(),
        line: 1,
        message: "empty trajectory file".into(),
    })?;
    let dim: usize = header
        .strip_prefix("dim")
        .and_then(|rest| rest.trim().strip_prefix('='))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| ModelError::Parse {
            path: display.clone(),
            line: 1,
            message: "expected 'dim = <n>' header".into(),
        })?;
    let mut traj = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| ModelError::Parse {
                    path: display.clone(),
                    line: idx + 1,
                    message: format!("'{t}' is not a number"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(ModelError::Parse {
                path: display.clone(),
                line: idx + 1,
                message: format!("expected {dim} values, got {}", values.len()),
            });
        }
        traj.push(Configuration::from_vec(values));
    }
    if traj.is_empty() {
        return Err(ModelError::Parse {
            path: display,
            line: 1,
            message: "trajectory has no waypoints".into(),
        });
    }
    Ok(traj)
}
