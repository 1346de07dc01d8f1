use dtameta::summary::FitSummary;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.digits$}"))
}

/// Plain-text block with the run settings, headline parameters and WAIC.
pub fn summary_block(s: &FitSummary) -> String {
    let c = &s.config;
    let mut out = format!(
        "model: {}   formula: {}   studies: {}\n\
         chains: {}   iter: {}   warmup: {}   thin: {}   seed: {}\n\
         total post-warmup draws: {}   divergences: {}\n\n",
        s.model, s.formula, s.n_studies, c.chains, c.iter, c.warmup, c.thin, c.seed, s.total_draws, s.divergences
    );
    out.push_str(&format!(
        "{:<20} {:>8} {:>8} {:>8} {:>8} {:>7}\n",
        "parameter", "mean", "2.5%", "97.5%", "n_eff", "Rhat"
    ));
    for p in s.key_parameters() {
        out.push_str(&format!(
            "{:<20} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>7}\n",
            p.name,
            p.mean,
            p.q025,
            p.q975,
            opt(p.n_eff, 0),
            opt(p.rhat, 3)
        ));
    }
    out.push_str(&format!(
        "\nlppd: {:.4}   p_waic: {:.4}   WAIC: {:.4}\n",
        s.waic.lppd, s.waic.p_waic, s.waic.waic
    ));
    out
}
