use std::collections::BTreeSet;

use pocket_core::agent::{Action, Decision, Outcome};
use pocket_core::device::{Gesture, IntentMsg, SceneDescriptor};
use pocket_core::fixtures;
use pocket_core::grounding::{hybrid_ground, GroundingSource, TargetSpec, DEFAULT_TAU};
use pocket_core::ingress::{TriggerEvent, TriggerSource};
use pocket_core::models::Models;
use pocket_core::replay::Tier;
use pocket_core::runtime::{Runtime, TurnKind};

fn runtime(dir: &tempfile::TempDir) -> Runtime {
    let device = fixtures::device(7).unwrap();
    let models = Models::stubs(device.screenshot_store());
    Runtime::new(device, models, fixtures::config(), dir.path().join("gallery.md")).unwrap()
}

fn say(rt: &mut Runtime, at: u64, text: &str) -> pocket_core::runtime::TurnReport {
    rt.submit(TriggerEvent::text(TriggerSource::Ui, at, "s1", text)).unwrap();
    rt.process_next(&mut |_| {}).unwrap().unwrap()
}

#[test]
fn camera_price_query_then_followup() {
    let dir = tempfile::tempdir().unwrap();
    let mut rt = runtime(&dir);
    rt.push_camera_frame(
        1000,
        SceneDescriptor {
            objects: vec!["Evian spray".into()],
            scene: "bathroom".into(),
            event: String::new(),
        },
    )
    .unwrap();
    let r = say(&mut rt, 1200, "How much does this cost on Taobao?");
    let intent = r.intent.clone().unwrap();
    assert_eq!(intent.expanded_query, "the user wants to know the price of Evian spray on Taobao");
    assert_eq!(intent.target_app, "shop");
    assert_eq!(r.outcome, Some(Outcome::Responded), "{:#?}", r.steps);
    let art = &r.new_artifacts[0];
    // 16 items, 4 per screen, 3-row scroll: offsets 0,3,6,9 → items 0..13
    assert_eq!(art.records.len(), 13);
    let summary = r.response.clone().unwrap();
    assert!(summary.contains("7.9") && summary.contains("45.0"), "{summary}");

    let f = say(&mut rt, 1500, "open the second item");
    assert_eq!(f.kind, TurnKind::FollowUp);
    let page = rt.device.current_page().unwrap();
    assert_eq!(page.activity, "Item");
    assert_eq!(page.params["title"], art.records[1]["title"]);
}

#[test]
fn quiz_loop_completes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rt = runtime(&dir);
    rt.device.launch_intent(&IntentMsg::view("app://quiz/start"), false).unwrap();
    rt.push_screen_frame(100).unwrap();
    let r = say(&mut rt, 200, "solve these problems");
    assert_eq!(r.intent.as_ref().unwrap().target_app, "quiz");
    assert_eq!(r.outcome, Some(Outcome::Completed), "{:#?}", r.steps);
    let executed = r.steps.iter().filter(|s| s.decision.is_executed()).count();
    assert_eq!(executed, 3);
    let wm = rt.sessions.resume("s1").unwrap();
    assert_eq!(wm.step_index, executed);
    assert_eq!(rt.device.current_page().unwrap().activity, "Done");
}

#[test]
fn parrot_album() {
    let dir = tempfile::tempdir().unwrap();
    let mut rt = runtime(&dir);
    let r = say(&mut rt, 0, "memory sync");
    assert_eq!(r.kind, TurnKind::Maintenance);
    let r = say(&mut rt, 10, "find all parrot-themed photos and generate a highlight album in one click");
    assert_eq!(r.outcome, Some(Outcome::Completed), "{:#?}", r.steps);
    let staged: BTreeSet<String> = rt
        .device
        .staged("staging/s1/")
        .unwrap()
        .iter()
        .map(|a| a.filename.clone())
        .collect();
    let want: BTreeSet<String> = fixtures::media()
        .into_iter()
        .filter(|m| m.truth_descriptor.objects.iter().any(|o| o == "parrot"))
        .map(|m| m.filename)
        .collect();
    assert_eq!(staged, want);
    assert_eq!(rt.device.current_page().unwrap().activity, "Album");
    assert!(r.steps.iter().any(|s| matches!(
        &s.decision,
        Decision::Act {
            action: Action::MultiTapTargets { .. },
            ..
        }
    )));
}

#[test]
fn flash_sale_clone_and_replay_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let mut rt = runtime(&dir);
    rt.device.launch_intent(&IntentMsg::component("local", "Home"), false).unwrap();
    rt.start_recording("rec").unwrap();
    for label in ["Deals", "Food Deals", "Flash Sale"] {
        let obs = rt.device.snapshot().unwrap();
        let g = hybrid_ground(&obs, &TargetSpec::text(label), rt.models.grounder.as_ref(), DEFAULT_TAU).unwrap();
        rt.gesture(&Gesture::tap(g.point)).unwrap();
    }
    let traj = rt.stop_recording().unwrap();
    assert_eq!(traj.steps.len(), 3);
    assert_eq!(traj.final_activity, "FlashSale");
    let card = rt.clone_skill(&traj).unwrap();
    assert_eq!(card.entry.data_uri.as_deref(), Some("app://local/flashsale/beijing"));
    rt.bookmark("flash", &traj).unwrap();

    rt.device.launch_intent(&IntentMsg::component("shop", "Home"), false).unwrap();
    let launches = rt.device.launch_log().len();
    let out = rt.replay_bookmark("flash").unwrap();
    assert_eq!(out.tier_used, Tier::FullIntent);
    assert_eq!(rt.device.launch_log().len(), launches + 1);

    rt.device.set_exported("local", "FlashSale", false);
    assert_eq!(rt.replay_bookmark("flash").unwrap().tier_used, Tier::Deeplink);

    rt.device.clear_deeplinks("local", "FlashSale");
    let out = rt.replay_bookmark("flash").unwrap();
    assert_eq!(out.tier_used, Tier::TaskStackRestore);
    assert_eq!(out.attempts.len(), 4);
}

#[test]
fn overlay_only_reward_button() {
    let mut d = fixtures::device(1).unwrap();
    let models = Models::stubs(d.screenshot_store());
    d.launch_intent(&IntentMsg::component("reward", "AdPage"), false).unwrap();
    let obs = d.snapshot().unwrap();
    let g = hybrid_ground(&obs, &TargetSpec::text("Claim Reward"), models.grounder.as_ref(), DEFAULT_TAU).unwrap();
    assert_eq!(g.source, GroundingSource::Ocr);
    d.apply_gesture(&Gesture::tap(g.point)).unwrap();
    assert_eq!(d.current_page().unwrap().activity, "Claimed");

    d.apply_gesture(&Gesture::Back).unwrap();
    let obs = d.snapshot().unwrap();
    let g = hybrid_ground(&obs, &TargetSpec::text("gift box icon"), models.grounder.as_ref(), DEFAULT_TAU).unwrap();
    assert_eq!(g.source, GroundingSource::Visual);
}
