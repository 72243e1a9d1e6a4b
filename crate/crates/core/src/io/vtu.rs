//! VTK XML unstructured-grid output with ASCII data arrays.
//!
//! Cell data: the raw P0 density `u`. Point data: `pi1_u` (the lumped
//! projection of `u` used for plotting), `v` and `w`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::fespace::{project_pih1, FeOperators, Projectable};
use crate::mesh::Mesh;
use crate::simulation::SimState;

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

fn data_array(out: &mut String, name: &str, values: &[f64]) {
    writeln!(out, "        <DataArray type=\"Float64\" Name=\"{name}\" format=\"ascii\">").unwrap();
    out.push_str("         ");
    for v in values {
        write!(out, " {v:e}").unwrap();
    }
    out.push_str("\n        </DataArray>\n");
}

/// Renders the state as a VTU document.
pub fn vtu_string(mesh: &Mesh, ops: &FeOperators, state: &SimState) -> Result<String> {
    state.u.check(mesh)?;
    state.v.check(mesh)?;
    state.w.check(mesh)?;
    let pi1_u = project_pih1(mesh, ops, &Projectable::P0(&state.u))?;
    let npe = mesh.nodes_per_element();
    let cell_type = if mesh.dim() == 2 { VTK_TRIANGLE } else { VTK_TETRA };

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str("<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">\n");
    out.push_str("  <UnstructuredGrid>\n");
    writeln!(out, "    <FieldData>").unwrap();
    writeln!(
        out,
        "      <DataArray type=\"Float64\" Name=\"TIME\" NumberOfTuples=\"1\" format=\"ascii\"> {:e} </DataArray>",
        state.time
    )
    .unwrap();
    writeln!(out, "    </FieldData>").unwrap();
    writeln!(
        out,
        "    <Piece NumberOfPoints=\"{}\" NumberOfCells=\"{}\">",
        mesh.num_vertices(),
        mesh.num_elements()
    )
    .unwrap();

    out.push_str("      <PointData Scalars=\"pi1_u\">\n");
    data_array(&mut out, "pi1_u", &pi1_u);
    data_array(&mut out, "v", &state.v);
    data_array(&mut out, "w", &state.w);
    out.push_str("      </PointData>\n");

    out.push_str("      <CellData Scalars=\"u\">\n");
    data_array(&mut out, "u", &state.u);
    out.push_str("      </CellData>\n");

    out.push_str("      <Points>\n");
    out.push_str("        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">\n         ");
    for p in mesh.vertices() {
        write!(out, " {:e} {:e} {:e}", p[0], p[1], p[2]).unwrap();
    }
    out.push_str("\n        </DataArray>\n      </Points>\n");

    out.push_str("      <Cells>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">\n         ");
    for el in mesh.elements() {
        for v in el {
            write!(out, " {v}").unwrap();
        }
    }
    out.push_str("\n        </DataArray>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">\n         ");
    for k in 1..=mesh.num_elements() {
        write!(out, " {}", k * npe).unwrap();
    }
    out.push_str("\n        </DataArray>\n");
    out.push_str("        <DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">\n         ");
    for _ in 0..mesh.num_elements() {
        write!(out, " {cell_type}").unwrap();
    }
    out.push_str("\n        </DataArray>\n      </Cells>\n");
    out.push_str("    </Piece>\n  </UnstructuredGrid>\n</VTKFile>\n");
    Ok(out)
}

pub fn write_vtu(mesh: &Mesh, ops: &FeOperators, state: &SimState, path: &Path) -> Result<()> {
    let text = vtu_string(mesh, ops, state)?;
    fs::write(path, text)?;
    Ok(())
}
