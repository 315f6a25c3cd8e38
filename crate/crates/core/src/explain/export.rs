//! CSV renderings of explanation artifacts. Numbers carry 9 significant digits.

use super::{
    AttentionFeatureRecord, CorrelationProfile, FeatureAttentionHeatmap, IndividualSummary,
    InteractionRecord, ModelInteraction, SimilarityRecord,
};
use crate::error::Result;

/// Shortest `%g`-style rendering with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn num(x: f64) -> String {
    fmt_sig(x, 9)
}

fn to_string(records: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// `cluster,model,feature,mean_r,n_individuals`
pub fn correlation_profiles_csv(profiles: &[CorrelationProfile], feature_names: &[String]) -> Result<String> {
    let mut rows = vec![header(&["cluster", "model", "feature", "mean_r", "n_individuals"])];
    for p in profiles {
        for (f, r) in p.r.iter().enumerate() {
            rows.push(vec![
                p.cluster.to_string(),
                p.model.to_string(),
                feature_names[f].clone(),
                num(*r),
                p.n_individuals.to_string(),
            ]);
        }
    }
    to_string(rows)
}

/// Square table: row label is the attending feature (y-axis), columns the
/// contributing features (x-axis).
pub fn heatmap_csv(h: &FeatureAttentionHeatmap, feature_names: &[String]) -> Result<String> {
    let mut head = vec!["feature".to_string()];
    head.extend(feature_names.iter().cloned());
    let mut rows = vec![head];
    for (i, name) in feature_names.iter().enumerate() {
        let mut r = vec![name.clone()];
        r.extend(h.matrix.row(i).iter().map(|&x| num(x)));
        rows.push(r);
    }
    to_string(rows)
}

/// `model,individual_id,true_cluster,class,probability,attention_focus,mean_<feature>`
pub fn attention_vs_feature_csv(records: &[AttentionFeatureRecord], feature_name: &str) -> Result<String> {
    let mean_col = format!("mean_{feature_name}");
    let mut rows = vec![header(&[
        "model",
        "individual_id",
        "true_cluster",
        "class",
        "probability",
        "attention_focus",
        &mean_col,
    ])];
    for r in records {
        rows.push(vec![
            r.model.to_string(),
            r.id.clone(),
            r.true_cluster.to_string(),
            r.class.to_string(),
            num(r.probability),
            num(r.attention_focus),
            num(r.mean_feature),
        ]);
    }
    to_string(rows)
}

/// `cluster,model,individual_id,time_index,<feature_a>,<feature_b>,attention`
pub fn interaction_csv(records: &[InteractionRecord], name_a: &str, name_b: &str) -> Result<String> {
    let mut rows = vec![header(&[
        "cluster",
        "model",
        "individual_id",
        "time_index",
        name_a,
        name_b,
        "attention",
    ])];
    for r in records {
        rows.push(vec![
            r.cluster.to_string(),
            r.model.to_string(),
            r.id.clone(),
            r.time_index.to_string(),
            num(r.value_a),
            num(r.value_b),
            num(r.weight),
        ]);
    }
    to_string(rows)
}

/// `feature,rank,time_index,value,attention`
pub fn individual_summary_csv(s: &IndividualSummary, feature_names: &[String]) -> Result<String> {
    let mut rows = vec![header(&["feature", "rank", "time_index", "value", "attention"])];
    for (f, entries) in s.features.iter().enumerate() {
        for (rank, e) in entries.iter().enumerate() {
            rows.push(vec![
                feature_names[f].clone(),
                (rank + 1).to_string(),
                e.time_index.to_string(),
                num(e.value),
                num(e.weight),
            ]);
        }
    }
    to_string(rows)
}

/// `model,time_index,<feature_a>,<feature_b>,attention`
pub fn cross_model_csv(tables: &[ModelInteraction], name_a: &str, name_b: &str) -> Result<String> {
    let mut rows = vec![header(&["model", "time_index", name_a, name_b, "attention"])];
    for t in tables {
        for &(time, a, b, w) in &t.rows {
            rows.push(vec![t.model.to_string(), time.to_string(), num(a), num(b), num(w)]);
        }
    }
    to_string(rows)
}

/// `individual_id,cluster,sim_cluster0,...`; empty when the cluster has no other member.
pub fn similarity_csv(records: &[SimilarityRecord], k: usize) -> Result<String> {
    let mut head = header(&["individual_id", "cluster"]);
    head.extend((0..k).map(|c| format!("sim_cluster{c}")));
    let mut rows = vec![head];
    for r in records {
        let mut row = vec![r.id.clone(), r.cluster.to_string()];
        row.extend(r.mean_similarity.iter().map(|s| s.map(num).unwrap_or_default()));
        rows.push(row);
    }
    to_string(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(1.0 / 3.0), "0.333333333");
        assert_eq!(num(-2.0 / 3.0), "-0.666666667");
        assert_eq!(num(123456.789012), "123456.789");
        assert_eq!(num(1.5e-7), "1.5e-7");
        assert_eq!(num(9.9999999999), "10");
        assert_eq!(num(2.5e12), "2.5e12");
        assert_eq!(num(f64::NAN), "nan");
    }
}
