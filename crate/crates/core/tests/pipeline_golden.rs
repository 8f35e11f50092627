use autoopt::agents::{RuleBased, ANCHOR_PROXIMITY_DEGREES};
use autoopt::pipeline::{parse_script, replay, scripts, Phase, Pipeline, PipelineSettings};
use autoopt::scene::angular_diff;

fn run() -> (autoopt::pipeline::Session, Pipeline) {
    let p = Pipeline::with_packaged_scenes(Box::new(RuleBased), PipelineSettings::default());
    let mut s = p.create_session("office").unwrap();
    replay(&p, &mut s, &parse_script(scripts::OFFICE)).unwrap();
    (s, p)
}

#[test]
fn office_script_reaches_candidates() {
    let (s, p) = run();
    assert_eq!(s.phase, Phase::Optimized);
    assert_eq!(s.candidates.len(), 4);
    assert!(s.candidates.iter().all(|c| c.feasible()));
    let spec = s.spec.as_ref().unwrap();
    assert_eq!(spec.widgets["Email"].anchor.as_deref(), Some("monitor"));
    let scene = p.scene("office").unwrap();
    let eye = scene.pose.eye_position;
    let monitor = scene.object("monitor").unwrap().bounds.center();
    let chosen = &s.candidates[s.recommended.unwrap()];
    let angle = angular_diff(chosen.layout.get("Email").unwrap(), eye, monitor - eye).unwrap();
    eprintln!("anchor angle {angle:.3} deg, recommended {:?}", s.recommended);
    for c in &s.candidates {
        eprintln!("{:?} {:?}", c.objectives, c.constraints);
    }
    assert!(angle <= ANCHOR_PROXIMITY_DEGREES);
}

#[test]
fn office_script_transcript_is_reproducible() {
    let (a, _) = run();
    let (b, _) = run();
    assert_eq!(a.transcript().to_json(), b.transcript().to_json());
}
