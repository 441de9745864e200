use std::io::{self, Write};

use super::GridField;

/// One row per node in flat (lexicographic) order: node coordinates, then
/// the value. Shortest round-trip float formatting keeps dumps reproducible.
pub fn write_csv<W: Write>(field: &GridField, mut out: W) -> io::Result<()> {
    let g = &field.grid;
    let header: Vec<String> = (0..g.dim()).map(|k| format!("axis{k}")).chain(["value".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, v) in field.values.iter().enumerate() {
        for x in g.node(i).as_slice() {
            write!(out, "{x:?},")?;
        }
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TangentGrid;

    #[test]
    fn csv_layout() {
        let g = TangentGrid::new(&[2, 2], &[1.0, 0.5], &[0.0, 0.0]).unwrap();
        let f = GridField::new(g, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "axis0,axis1,value\n0.0,0.0,1.0\n0.0,0.5,2.0\n1.0,0.0,3.0\n1.0,0.5,4.5\n");
    }
}
