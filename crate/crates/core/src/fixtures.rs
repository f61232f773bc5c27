//! Built-in test objects.

use crate::design::{parse_design, Design};
use crate::geom::{Point2, Polygon};
use crate::mesh::TriangleMesh;

/// Blue/yellow gradient varying in x and y.
pub const XY_GRADIENT: [&str; 2] = [
    "(1+sin(0.02*x+0.03*y)*cos(0.03*x-0.02*y))/2",
    "1-(1+sin(0.02*x+0.03*y)*cos(0.03*x-0.02*y))/2",
];

/// Gradient used on the palette test object.
pub const PALETTE_GRADIENT: [&str; 2] = [
    "(1+sin(0.025*x+0.0375*y)*cos(0.0375*x-0.025*y))/2",
    "1-(1+sin(0.025*x+0.0375*y)*cos(0.0375*x-0.025*y))/2",
];

/// Mesh file name the palette design refers to.
pub const PALETTE_MESH: &str = "palette.stl";

/// Periodic 3D gradient with period `alpha` mm.
pub fn periodic_gradient(alpha: f64) -> [String; 2] {
    let core = format!("0.5*sin(2*pi*x/{alpha})*cos(2*pi*y/{alpha})*sin(2*pi*z/{alpha})");
    [format!("0.5+{core}"), format!("0.5-{core}")]
}

/// Elliptical slab 135 x 175 x 2 mm, standing in for a vase cross-section.
pub fn palette_mesh() -> TriangleMesh {
    let footprint = Polygon::circle(Point2::new(0.0, 0.0), 1.0, 256)
        .outer
        .into_iter()
        .map(|p| Point2::new(p.x * 67.5, p.y * 87.5))
        .collect::<Vec<_>>();
    TriangleMesh::extrude(&footprint, 0.0, 2.0)
}

pub fn palette_design() -> Design {
    let text = format!(
        "fgrade([\"{}\", \"{}\"], [\"yellow\", \"blue\"]) {{\n    mesh(\"{PALETTE_MESH}\");\n}}\n",
        PALETTE_GRADIENT[0], PALETTE_GRADIENT[1]
    );
    let mut d = parse_design(&text).expect("palette design parses");
    d.insert_mesh(PALETTE_MESH, palette_mesh());
    d
}

/// Boat-like composite, 60 x 31 x 48 mm, graded with [`periodic_gradient`].
pub fn benchy_source(alpha: f64) -> String {
    let [a, b] = periodic_gradient(alpha);
    format!(
        r#"fgrade(["{a}", "{b}"], ["yellow", "blue"]) {{
    union() {{
        difference() {{
            rectprism(60, 31, 20);
            translate([0, 0, 4]) {{ rectprism(52, 25, 20); }}
        }}
        translate([-6, 0, 20]) {{
            difference() {{
                rectprism(24, 20, 14);
                translate([0, 0, 2]) {{ rectprism(20, 16, 14); }}
            }}
        }}
        translate([18, 0, 20]) {{ cylinder(4, 28); }}
    }}
}}
"#
    )
}

pub fn benchy_design(alpha: f64) -> Design {
    parse_design(&benchy_source(alpha)).expect("benchy design parses")
}

/// Tensile bar graded along its length, 8 layers of 0.2 mm.
pub fn dog_bone_source() -> String {
    r#"fgrade(["0.5 - x/138", "0.5 + x/138"], ["blue", "yellow"]) {
    union() {
        rectprism(138, 13, 1.6);
        translate([-55, 0, 0]) { rectprism(28, 19, 1.6); }
        translate([55, 0, 0]) { rectprism(28, 19, 1.6); }
    }
}
"#
    .to_string()
}

pub fn dog_bone_design() -> Design {
    parse_design(&dog_bone_source()).expect("dog bone design parses")
}

/// Square plate graded in x and y.
pub fn xy_plate_design(side: f64, height: f64) -> Design {
    let text = format!(
        "fgrade([\"{}\", \"{}\"], [\"blue\", \"yellow\"]) {{ rectprism({side}, {side}, {height}); }}",
        XY_GRADIENT[0], XY_GRADIENT[1]
    );
    parse_design(&text).expect("plate design parses")
}

/// Disk graded along the radius.
pub fn radial_disk_design(radius: f64, height: f64) -> Design {
    let text = format!("fgrade([\"1 - rho/{radius}\", \"rho/{radius}\"], [\"blue\", \"yellow\"]) {{ cylinder({radius}, {height}); }}");
    parse_design(&text).expect("disk design parses")
}

/// Looks a built-in design up by name.
pub fn by_name(name: &str) -> Option<Design> {
    Some(match name {
        "palette" => palette_design(),
        "benchy" => benchy_design(25.0),
        "dogbone" => dog_bone_design(),
        "plate" => xy_plate_design(100.0, 0.4),
        "disk" => radial_disk_design(20.0, 0.4),
        "calibration" => crate::simulator::CalibrationObject::default().design(0.2),
        _ => return None,
    })
}

pub const NAMES: [&str; 6] = ["palette", "benchy", "dogbone", "plate", "disk", "calibration"];
