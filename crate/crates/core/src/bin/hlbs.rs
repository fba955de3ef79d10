use clap::Parser;

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn main() -> anyhow::Result<()> {
    let cli = hlbs::cli::Cli::parse();
    hlbs::cli::run(cli)?;
    if std::env::var_os("HLBS_PEAK_RSS").is_some() {
        if let Some(kib) = peak_rss_kib() {
            eprintln!("peak_rss_kib {kib}");
        }
    }
    Ok(())
}
