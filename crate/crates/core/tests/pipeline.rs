use qcontour_core::contours::{coverage, halfspace_intersection, hausdorff_distance};
use qcontour_core::directional::sweep_directions;
use qcontour_core::io::{load_model, save_model, ModelFile, Sweep};
use qcontour_core::splines::make_basis;
use qcontour_core::stratified::{fit_setting1, fit_setting2};
use qcontour_core::synthetic::{gen_synthetic, Family};
use qcontour_core::{CovariateModel, KnotPlacement, RunConfig, SettingKind, TauGrid};

#[test]
fn swapped_data_gives_mirrored_contour() {
    let data = gen_synthetic(Family::NormalNonlinear { lambda: 1.0 }, 800, 3).data;
    for model in [
        CovariateModel::Linear,
        CovariateModel::Spline(make_basis(3, 2, &data.x, KnotPlacement::Quantile).unwrap()),
    ] {
        let a = halfspace_intersection(&sweep_directions(&data, 0.2, 72, &model).unwrap(), 0.4)
            .unwrap();
        let mut b = halfspace_intersection(
            &sweep_directions(&data.swapped(), 0.2, 72, &model).unwrap(),
            0.4,
        )
        .unwrap();
        b.vertices.iter_mut().for_each(|v| v.swap(0, 1));
        assert!(hausdorff_distance(&a, &b) < 1e-6);
    }
}

#[test]
fn deeper_contours_are_nested() {
    let data = gen_synthetic(Family::NormalLinear, 3000, 4).data;
    let outer = halfspace_intersection(
        &sweep_directions(&data, 0.05, 90, &CovariateModel::Linear).unwrap(),
        0.5,
    )
    .unwrap();
    let inner = halfspace_intersection(
        &sweep_directions(&data, 0.3, 90, &CovariateModel::Linear).unwrap(),
        0.5,
    )
    .unwrap();
    assert!(inner.area() < outer.area());
    assert_eq!(coverage(&outer, &inner.vertices), 1.0);
    assert!(outer.is_strictly_convex() && inner.is_strictly_convex());
}

#[test]
fn setting_one_joint_cdf_at_the_mean() {
    // P(Z1 ≤ 0, Z2 ≤ 0) = 1/4 + asin(ρ)/(2π) = 1/3 for ρ = 0.5
    let syn = gen_synthetic(Family::NormalLinear, 8000, 5);
    let (model, _) = fit_setting1(&syn.data, &TauGrid::even(99).unwrap())
        .unwrap()
        .rearrange(&[])
        .unwrap();
    let x0 = 0.5;
    let f = model.joint_cdf(x0, syn.truth.mean(x0), 40_000, 9).unwrap();
    assert!((f - 1.0 / 3.0).abs() < 0.02, "{f}");
}

#[test]
fn setting_two_tracks_nonlinear_mean() {
    let syn = gen_synthetic(Family::NormalNonlinear { lambda: 2.0 }, 6000, 6);
    let basis = make_basis(4, 4, &syn.data.x, KnotPlacement::Quantile).unwrap();
    let (model, _) = fit_setting2(&syn.data, &TauGrid::even(49).unwrap(), &basis)
        .unwrap()
        .rearrange(&[])
        .unwrap();
    for x0 in [0.25, 0.5, 0.75] {
        let q = model
            .predict_quantile(qcontour_core::stratified::Which::Marginal, x0, 0.5)
            .unwrap();
        assert!((q - syn.truth.mean(x0)[0]).abs() < 0.15, "x0 {x0}: {q}");
    }
}

#[test]
fn model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_synthetic(Family::NormalLinear, 300, 7).data;
    let basis = make_basis(4, 3, &data.x, KnotPlacement::Quantile).unwrap();

    let model = fit_setting2(&data, &TauGrid::even(19).unwrap(), &basis).unwrap();
    let file = ModelFile::Stratified {
        config: RunConfig {
            setting: SettingKind::Two,
            ..RunConfig::default()
        },
        columns: data.names.clone(),
        covariate: data.x.clone(),
        model,
    };
    let path = dir.path().join("s.json");
    save_model(&file, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), file);

    let covariate_model = CovariateModel::Spline(basis);
    let fits = sweep_directions(&data, 0.2, 12, &covariate_model).unwrap();
    let file = ModelFile::Directional {
        config: RunConfig {
            setting: SettingKind::DirSpline,
            ..RunConfig::default()
        },
        covariate_model,
        data,
        sweeps: vec![Sweep { tau: 0.2, fits }],
    };
    let path = dir.path().join("d.json");
    save_model(&file, &path).unwrap();
    let back = load_model(&path).unwrap();
    let (ModelFile::Directional { sweeps: a, .. }, ModelFile::Directional { sweeps: b, .. }) =
        (&file, &back)
    else {
        panic!("wrong kind");
    };
    let ca = halfspace_intersection(&a[0].fits, 0.5).unwrap();
    let cb = halfspace_intersection(&b[0].fits, 0.5).unwrap();
    assert_eq!(ca, cb);

    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"format\": \"qcontour-model\""));
}

#[test]
fn model_file_rejects_unknown_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(
        &path,
        r#"{"format": "other", "version": 1, "kind": "stratified"}"#,
    )
    .unwrap();
    assert!(load_model(&path).is_err());
}
