use anyhow::{bail, Context, Result};

use rgnn::pipeline::graph_key;

use super::commands::{load_corpus, out_dir, train_into, write_tsv};
use super::settings::{canonical_key, Settings};

/// Parses `key=v1,v2;key=v3` into ordered `(key, values)` axes.
pub fn parse_grid(grid: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut axes = Vec::new();
    for part in grid.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, vs) = part
            .split_once('=')
            .with_context(|| format!("grid axis `{part}` is not key=v1,v2"))?;
        let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            bail!("grid axis `{k}` has no values");
        }
        axes.push((canonical_key(k), values));
    }
    if axes.is_empty() {
        bail!("empty grid");
    }
    Ok(axes)
}

/// Grid assignments of one cell with the settings they produce.
pub type Cell = (Vec<(String, String)>, Settings);

/// Cartesian product of the axes applied on top of `base`, first axis
/// varying slowest.
pub fn plan_cells(base: &Settings, axes: &[(String, Vec<String>)]) -> Result<Vec<Cell>> {
    let mut cells = vec![(Vec::new(), base.clone())];
    for (key, values) in axes {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for (assign, s) in &cells {
            for v in values {
                let mut s = s.clone();
                s.set(key, v)?;
                let mut assign = assign.clone();
                assign.push((key.clone(), v.clone()));
                next.push((assign, s));
            }
        }
        cells = next;
    }
    for (_, s) in &cells {
        s.validate()?;
    }
    Ok(cells)
}

/// Whether moving from `prev` to `next` invalidates the graph cache.
pub fn needs_graph_rebuild(prev: Option<&Settings>, next: &Settings) -> bool {
    prev.is_none_or(|p| graph_key(p.model.omega, p.seed) != graph_key(next.model.omega, next.seed))
}

pub fn sweep(base: &Settings, grid: &str) -> Result<()> {
    let axes = parse_grid(grid)?;
    let cells = plan_cells(base, &axes)?;
    let (corpus, dir) = load_corpus(base)?;
    let out = out_dir(base)?;
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(axes.iter().map(|(k, _)| k.clone()));
    header.extend(["graph_rebuild", "best_epoch", "epochs", "val_mse", "test_mse"].map(String::from));

    let mut rows = Vec::new();
    let mut prev: Option<&Settings> = None;
    for (n, (assign, s)) in cells.iter().enumerate() {
        let rebuild = needs_graph_rebuild(prev, s);
        log::info!("cell {n}: {assign:?}");
        let r = train_into(s, &corpus, &dir, &out.join(format!("cell-{n:03}")), "sweep")?;
        let mut row = vec![n.to_string()];
        row.extend(assign.iter().map(|(_, v)| v.clone()));
        row.extend([
            rebuild.to_string(),
            r.outcome.history.best_epoch.unwrap_or(0).to_string(),
            r.outcome.history.epochs.len().to_string(),
            r.val.mse.to_string(),
            r.test.mse.to_string(),
        ]);
        println!("{}", row.join("\t"));
        rows.push(row);
        prev = Some(s);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_tsv(&out.join("sweep.tsv"), &header, &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_grid() {
        let axes = parse_grid("d2=8").unwrap();
        let cells = plan_cells(&Settings::default(), &axes).unwrap();
        assert_eq!(cells.len(), 1);
    }

    #[test]
    fn cartesian_order() {
        let axes = parse_grid("layers=1,2; alpha=0.1,0.5,0.9").unwrap();
        let cells = plan_cells(&Settings::default(), &axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].1.model.layers, 1);
        assert_eq!(cells[2].1.model.alpha, 0.9);
        assert_eq!(cells[3].1.model.layers, 2);
    }

    #[test]
    fn only_window_or_seed_changes_rebuild_graphs() {
        let base = Settings::default();
        let axes = parse_grid("d2=4,8").unwrap();
        let cells = plan_cells(&base, &axes).unwrap();
        assert!(needs_graph_rebuild(None, &cells[0].1));
        assert!(!needs_graph_rebuild(Some(&cells[0].1), &cells[1].1));
        let axes = parse_grid("omega=2,3").unwrap();
        let cells = plan_cells(&base, &axes).unwrap();
        assert!(needs_graph_rebuild(Some(&cells[0].1), &cells[1].1));
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(parse_grid("").is_err());
        assert!(parse_grid("d2").is_err());
        assert!(parse_grid("d2=").is_err());
        assert!(plan_cells(&Settings::default(), &parse_grid("alpha=2").unwrap()).is_err());
        assert!(plan_cells(&Settings::default(), &parse_grid("bogus=1").unwrap()).is_err());
    }
}
