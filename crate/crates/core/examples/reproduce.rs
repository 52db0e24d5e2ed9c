//! Run the stored experiment presets and write their outputs.
//!
//! Pass preset names to pick some, e.g. `fig3_zoom fig4_twotone`. The
//! density-matrix presets take seconds each.

use ddshaper::harness::{run_experiment, ExperimentKind, ExperimentSpec};

fn main() -> ddshaper::Result<()> {
    let picked: Vec<ExperimentKind> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let kinds = if picked.is_empty() {
        vec![ExperimentKind::Fig2Shaped, ExperimentKind::Fig3Zoom, ExperimentKind::Fig4TwoTone]
    } else {
        picked
    };
    let root = std::env::temp_dir().join("ddshaper-reproduce");
    for kind in kinds {
        let out = run_experiment(&ExperimentSpec::new(kind))?;
        let dir = root.join(kind.name());
        std::fs::create_dir_all(&dir)?;
        out.write(&dir)?;
        println!("{kind} -> {}", dir.display());
        println!("{}", serde_json::to_string_pretty(&out.summary)?);
    }
    Ok(())
}
