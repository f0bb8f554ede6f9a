use num_complex::Complex64;
use rand::Rng;
use stbc_core::capacity::{capacity_sweep, read_capacity_csv, write_capacity_csv};
use stbc_core::decoder::Constellation;
use stbc_core::design::{build_rate1_4group, codeword, verify_group_conditions, StbcDesign};
use stbc_core::gain::{builtin_rotation, Encoder};
use stbc_core::rng::stream_rng;
use stbc_core::sim::{
    build_layered, emit_csv, parse_csv, run_error_sweep, verify_all, verify_design, DesignSource,
    SimConfig,
};

/// Negates one nonzero entry of weight `w` in a design file.
fn flip_one_sign(text: &str, w: usize) -> String {
    let header = format!("weight {w} ");
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let start = lines.iter().position(|l| l.starts_with(&header)).unwrap() + 1;
    'rows: for line in &mut lines[start..] {
        let mut tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        for tok in &mut tokens {
            let z = parse_entry(tok);
            if z.norm() > 0.0 {
                *tok = format!("{}{:+}i", -z.re, -z.im);
                *line = tokens.join(" ");
                break 'rows;
            }
        }
    }
    lines.join("\n") + "\n"
}

fn parse_entry(tok: &str) -> Complex64 {
    let body = tok.strip_suffix('i').unwrap();
    let split = body.rfind(['+', '-']).filter(|&p| p > 0).unwrap();
    Complex64::new(
        body[..split].parse().unwrap(),
        body[split..].parse().unwrap(),
    )
}

#[test]
fn verify_all_passes_for_eight_antennas_two_layers() {
    let rep = verify_all(3, 2).unwrap();
    assert!(rep.passed(), "{}", rep.to_text());
}

#[test]
fn design_file_round_trips() {
    let d = build_layered(
        2,
        2,
        Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
    )
    .unwrap();
    let back = StbcDesign::from_text(&d.to_text()).unwrap();
    assert_eq!(back.to_text(), d.to_text());
    assert!(verify_group_conditions(&back).passed());
}

#[test]
fn corrupted_design_file_fails_with_witness() {
    let d = build_rate1_4group(2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corrupt.design");
    std::fs::write(&path, flip_one_sign(&d.to_text(), 5)).unwrap();
    let bad = StbcDesign::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let report = verify_group_conditions(&bad);
    assert!(!report.passed());
    let first = report.failures().next().unwrap();
    let (i, j) = first.witness.expect("failure carries a witness");
    assert!(
        i == 5 || j == 5,
        "witness ({i}, {j}) should involve the corrupted weight"
    );
    let text = verify_design(&bad).to_text();
    assert!(text.contains("FAIL") && text.contains("A6"), "{text}");
}

#[test]
fn sim_csv_round_trip_through_file() {
    let cfg = SimConfig {
        design: DesignSource::Builtin {
            a: 1,
            layers: 2,
            layer_angle: 0.0,
        },
        snr_db: vec![0.0, 10.0],
        trials: 200,
        seed: 4,
        ..SimConfig::default()
    };
    let recs = run_error_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    emit_csv(&recs, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("snr_db,trials,cer,ser,mean_evals,wall_time_s"));
    assert_eq!(parse_csv(text.as_bytes()).unwrap(), recs);
    for r in &recs {
        assert!(r.symbol_errors <= 4 * r.codeword_errors);
        assert!(r.codeword_errors <= r.symbol_errors);
        assert!((0.0..=1.0).contains(&r.ser) && (0.0..=1.0).contains(&r.cer));
    }
}

#[test]
fn capacity_csv_round_trip() {
    let d = build_rate1_4group(2).unwrap();
    let recs = capacity_sweep(&d, 1, &[0.0, 10.0, 20.0], 150, 3).unwrap();
    let mut buf = Vec::new();
    write_capacity_csv(&recs, &mut buf).unwrap();
    assert!(buf.starts_with(b"snr_db,mean_bits,std_err,trials\n"));
    assert_eq!(read_capacity_csv(buf.as_slice()).unwrap(), recs);
}

#[test]
fn average_codeword_energy_matches_antenna_count() {
    for (a, layers) in [(1, 2), (2, 1), (2, 2), (3, 2)] {
        let d = build_layered(a, layers, Complex64::new(1.0, 0.0)).unwrap();
        let c = Constellation::qam(4).unwrap();
        let enc = Encoder::new(&d, &builtin_rotation(d.n_t() / 2).unwrap(), &c).unwrap();
        let alpha = d.energy_scale();
        let mut rng = stream_rng(99, a as u64);
        let trials = 10_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let info: Vec<usize> = (0..enc.len())
                .map(|_| rng.random_range(0..c.side()))
                .collect();
            let x = codeword(&d, &enc.encode_indices(&info)).unwrap();
            total += alpha * alpha * x.fro_norm_sq();
        }
        let mean = total / trials as f64;
        let target = (d.n_t() * d.t()) as f64;
        assert!(
            (mean - target).abs() < 0.01 * target,
            "a={a} L={layers}: {mean} vs {target}"
        );
    }
}
