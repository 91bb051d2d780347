//! The HTTP service, exercised in-process: load an ensemble, then call
//! `/health`, `/recommend` (valid and invalid), `/boundary` and
//! `/coach_probs` the way a client would.
//!
//! ```text
//! cargo run --release --example service
//! ```
//!
//! To serve for real, save the ensemble with `BootstrapEnsemble::save` and
//! run `fourthdown serve --ensemble DIR --listen 127.0.0.1:8080`.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use fourthdown::bootstrap::{fit_ensemble, ResamplePlan};
use fourthdown::coach::fit_coach;
use fourthdown::gbt::GbtParams;
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::service::{router, CorsConfig, Loaded, ServiceState};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> anyhow::Result<(StatusCode, String)> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, String::from_utf8_lossy(&bytes).into_owned()))
}

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let plays = simulate_history(&world, 300, 41);
    let config = FitConfig::small();
    let coach = fit_coach(&plays, &GbtParams { n_rounds: 60, early_stopping: None, ..GbtParams::default() })?.model;
    let (data, fit) = fit_decision_model(plays, &config)?;
    let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(5, 11, 1.0)?, &config)?;

    let state = ServiceState::new();
    let app = router(state.clone(), &CorsConfig::default())?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        println!("before loading: {:?}", call(&app, "GET", "/health", "").await?);
        state.install(Loaded::new(ensemble, Some(coach), 0.9)?);
        println!("after loading:  {:?}\n", call(&app, "GET", "/health", "").await?);

        let play = r#"{"yardline":36,"ydstogo":2,"game_seconds_remaining":1200,"score_differential":-3}"#;
        let (status, body) = call(&app, "POST", "/recommend", play).await?;
        let v: serde_json::Value = serde_json::from_str(&body)?;
        println!(
            "/recommend {status}: best {} boot% {} bin {} ci {}",
            v["best"], v["boot_pct"], v["bin"], v["ci"]
        );
        let bad = r#"{"yardline":10,"ydstogo":15,"game_seconds_remaining":1200,"score_differential":0}"#;
        println!("/recommend (invalid): {:?}", call(&app, "POST", "/recommend", bad).await?);

        let grid = format!(r#"{{"state":{play},"y_range":[34,36],"z_range":[1,2],"mode":"boot"}}"#);
        println!("/boundary: {:?}", call(&app, "POST", "/boundary", &grid).await?);
        println!("/coach_probs: {:?}", call(&app, "POST", "/coach_probs", play).await?);
        anyhow::Ok(())
    })
}
