//! Emit gnuplot scripts that render the standard figures from run CSVs.
//! Nothing is rendered here; the scripts are plain text referencing the
//! data files by relative path.

use std::path::{Path, PathBuf};

use clap::Args;

use ptcl::{Error, Result};

#[derive(Args)]
pub struct FigArgs {
    /// Directory holding the run CSVs.
    #[arg(long, default_value = "out")]
    pub data: PathBuf,
    /// Where to write the scripts (default: the data directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit only the named figures (comma separated):
    /// rates, protocol, solution, mass, profile.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

struct Figure {
    name: &'static str,
    inputs: &'static [&'static str],
    script: fn(&str) -> String,
}

const FIGURES: &[Figure] = &[
    Figure { name: "rates", inputs: &["rates_vs_d.csv", "rates_vs_T.csv"], script: rates_gp },
    Figure { name: "protocol", inputs: &["means.csv"], script: protocol_gp },
    Figure { name: "solution", inputs: &["means.csv"], script: solution_gp },
    Figure { name: "mass", inputs: &["mass_cycles.csv"], script: mass_gp },
    Figure { name: "profile", inputs: &["mass_profile.csv"], script: profile_gp },
];

pub fn cmd_figures(args: &FigArgs) -> Result<()> {
    let out_dir = args.out.clone().unwrap_or_else(|| args.data.clone());
    std::fs::create_dir_all(&out_dir)?;
    let selected: Vec<&Figure> = if args.only.is_empty() {
        FIGURES.iter().collect()
    } else {
        let mut picked = Vec::new();
        for name in &args.only {
            match FIGURES.iter().find(|f| f.name == name.as_str()) {
                Some(f) => picked.push(f),
                None => {
                    return Err(Error::Config(format!(
                        "unknown figure `{name}`; expected one of rates, protocol, solution, \
                         mass, profile"
                    )))
                }
            }
        }
        picked
    };

    let mut written = Vec::new();
    for fig in selected {
        for input in fig.inputs {
            let path = args.data.join(input);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "figure `{}` needs missing input {}",
                    fig.name,
                    path.display()
                )));
            }
        }
        let data_rel = relative_prefix(&out_dir, &args.data);
        let path = out_dir.join(format!("{}.gp", fig.name));
        std::fs::write(&path, (fig.script)(&data_rel))?;
        written.push(path);
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Path prefix from the script directory to the data directory.
fn relative_prefix(script_dir: &Path, data_dir: &Path) -> String {
    if script_dir == data_dir {
        String::new()
    } else {
        format!("{}/", data_dir.display())
    }
}

fn rates_gp(d: &str) -> String {
    format!(
        r#"set datafile separator ","
set terminal pngcairo size 1400,420
set output "rates.png"
set multiplot layout 1,3
set logscale y
set xlabel "V (V)"
set ylabel "r_dissol (mol cm^-2 s^-1)"
set key autotitle columnhead noenhanced
plot for [col=2:6] "{d}rates_vs_d.csv" using 1:col with lines
set ylabel "r_dissol (mol cm^-2 s^-1)"
plot for [col=2:6] "{d}rates_vs_T.csv" using 1:col with lines
set ylabel "r_oxide (mol cm^-2 s^-1)"
plot for [col=7:11] "{d}rates_vs_T.csv" using 1:col with lines
unset multiplot
"#
    )
}

fn protocol_gp(d: &str) -> String {
    format!(
        r#"set datafile separator ","
set terminal pngcairo size 900,600
set output "protocol.png"
set multiplot layout 2,1
set xlabel "t (s)"
set ylabel "V (V)"
plot "{d}means.csv" using 1:2 with lines title "V(t)"
set ylabel "rates (mol cm^-2 s^-1)"
plot "{d}means.csv" using 1:6 with lines title "100 x r_dissol", \
     "{d}means.csv" using 1:7 with lines title "r_oxide"
unset multiplot
"#
    )
}

fn solution_gp(d: &str) -> String {
    format!(
        r#"set datafile separator ","
set terminal pngcairo size 900,900
set output "solution.png"
set multiplot layout 3,1
set xlabel "t (s)"
set ylabel "mean c (mol cm^-3)"
plot "{d}means.csv" using 1:3 with lines notitle
set ylabel "mean d (cm)"
plot "{d}means.csv" using 1:4 with lines notitle
set ylabel "mean theta"
plot "{d}means.csv" using 1:5 with lines notitle
unset multiplot
"#
    )
}

fn mass_gp(d: &str) -> String {
    format!(
        r#"set datafile separator ","
set terminal pngcairo size 900,600
set output "mass.png"
set xlabel "cycle"
set ylabel "m_Pt"
plot "{d}mass_cycles.csv" using 1:3 with linespoints title "mean Pt mass fraction"
"#
    )
}

fn profile_gp(d: &str) -> String {
    format!(
        r#"set datafile separator ","
set terminal pngcairo size 900,600
set output "profile.png"
set xlabel "x (cm)"
set ylabel "m_Pt"
plot for [c in system("awk -F, 'NR>1 {{print $1}}' {d}mass_profile.csv | sort -nu")] \
    "<awk -F, -v c=".c." 'NR==1 || $1==c' {d}mass_profile.csv" using 2:3 \
    with linespoints title "cycle ".c
"#
    )
}
