//! Plain-text tables for the JSON reports a run emits.

use serde_json::Value;

fn num(v: &Value) -> String {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if x.fract() == 0.0 && x.abs() < 1e15 {
                format!("{x}")
            } else {
                format!("{x:.4e}")
            }
        }
        Value::String(s) => s.clone(),
        Value::Bool(b) => if *b { "yes" } else { "no" }.into(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate() {
            w[k] = w[k].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells.iter().enumerate().map(|(k, c)| format!("{c:>width$}", width = w[k])).collect::<Vec<_>>().join("  ")
    };
    let mut s = line(header);
    s.push('\n');
    s.push_str(&w.iter().map(|n| "-".repeat(*n)).collect::<Vec<_>>().join("  "));
    s.push('\n');
    for r in rows {
        s.push_str(&line(r));
        s.push('\n');
    }
    s
}

fn mc(v: &Value) -> String {
    let mut out = format!("estimator: {}\n", num(&v["estimator"]));
    if let Some(p) = v["params"].as_object() {
        for (k, x) in p {
            out.push_str(&format!("  {k} = {x}\n"));
        }
    }
    let rows = v["rows"].as_array().cloned().unwrap_or_default();
    let mut stat_keys: Vec<String> = vec![];
    for r in &rows {
        if let Some(m) = r["stats"].as_object() {
            for k in m.keys() {
                if !stat_keys.contains(k) {
                    stat_keys.push(k.clone());
                }
            }
        }
    }
    let mut header: Vec<String> = ["N", "key", "estimate", "95% interval"].map(String::from).to_vec();
    header.extend(stat_keys.iter().cloned());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let p = &r["proportion"];
            let mut cells = vec![num(&r["n"]), num(&r["key"])];
            if p.is_object() {
                cells.push(format!("{}/{}", num(&p["successes"]), num(&p["trials"])));
                cells.push(format!("[{:.3}, {:.3}]", p["ci_low"].as_f64().unwrap_or(0.0), p["ci_high"].as_f64().unwrap_or(0.0)));
            } else {
                cells.extend(["-".into(), "-".into()]);
            }
            for k in &stat_keys {
                cells.push(num(&r["stats"][k]));
            }
            cells
        })
        .collect();
    out.push_str(&table(&header, &body));
    for f in v["fits"].as_array().into_iter().flatten() {
        out.push_str(&format!(
            "fit {}: slope {} +- {}\n",
            num(&f["name"]),
            num(&f["fit"]["slope"]),
            num(&f["fit"]["slope_se"])
        ));
    }
    for w in v["warnings"].as_array().into_iter().flatten() {
        out.push_str(&format!("warning: {}\n", num(w)));
    }
    out
}

fn assumptions(v: &Value) -> String {
    let mut out = format!(
        "N = {}, d = {}, alpha = {}, p = {}, delta_N = {}\n",
        num(&v["n"]),
        num(&v["dim"]),
        num(&v["alpha"]),
        num(&v["p"]),
        num(&v["delta_n"])
    );
    let rows = vec![
        vec!["delta_N <= d_min1".into(), num(&v["delta_ok"]), num(&v["d_min1"])],
        vec!["conv".into(), num(&v["cond_conv"]["pass"]), num(&v["cond_conv"]["value"])],
        vec!["wp".into(), num(&v["cond_wp"]["pass"]), num(&v["cond_wp"]["value"])],
        vec!["strong1".into(), num(&v["cond_strong1"]["pass"]), num(&v["cond_strong1"]["worst_ratio"])],
        vec!["strong2".into(), num(&v["cond_strong2"]["pass"]), num(&v["cond_strong2"]["worst_value"])],
        vec!["absorbable".into(), num(&v["cond_absorbable"]["pass"]), num(&v["cond_absorbable"]["lhs"])],
    ];
    out.push_str(&table(&["condition", "holds", "statistic"].map(String::from), &rows));
    out.push_str(&format!("all hold: {}\n", num(&v["all_pass"])));
    out
}

fn conclusion_rows(reports: &[Value]) -> String {
    let header = ["N", "M", "W_p(0)", "sup W_p", "sup ratio", "C_dist", "C_wp", "floor"].map(String::from);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                num(&r["n"]),
                num(&r["m"]),
                num(&r["samples"][0]["w_p"]),
                num(&r["sup_w_p"]),
                num(&r["sup_ratio"]),
                num(&r["fitted_c_dist"]),
                num(&r["fitted_c_wp"]),
                num(&r["reference_floor"]),
            ]
        })
        .collect();
    table(&header, &rows)
}

fn generic(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                generic(x, &p, out);
            }
        }
        Value::Array(a) if a.len() > 8 => out.push_str(&format!("{prefix} = [{} entries]\n", a.len())),
        Value::Array(a) => {
            for (k, x) in a.iter().enumerate() {
                generic(x, &format!("{prefix}[{k}]"), out);
            }
        }
        other => out.push_str(&format!("{prefix} = {}\n", num(other))),
    }
}

/// Renders any report JSON; unknown shapes fall back to `key = value` lines.
pub fn render(v: &Value) -> String {
    if v.get("estimator").is_some() && v.get("rows").is_some() {
        mc(v)
    } else if v.get("cond_conv").is_some() {
        assumptions(v)
    } else if let (Some(reps), Some(checks)) = (v["reports"].as_array(), v.get("checks")) {
        let mut s = conclusion_rows(reps);
        let mut c = String::new();
        generic(checks, "check", &mut c);
        s.push_str(&c);
        s
    } else if v.get("sup_ratio").is_some() && v.get("samples").is_some() {
        conclusion_rows(std::slice::from_ref(v))
    } else {
        let mut s = String::new();
        generic(v, "", &mut s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_align() {
        let t = table(&["a".into(), "bb".into()], &[vec!["123".into(), "4".into()]]);
        assert_eq!(t, "  a  bb\n---  --\n123   4\n");
    }

    #[test]
    fn fallback_flattens() {
        let v: Value = serde_json::json!({"x": {"y": 1.5, "z": [true]}});
        assert_eq!(render(&v), "x.y = 1.5000e0\nx.z[0] = yes\n");
    }
}
