//! The simulated device in the browser: tap the canvas, find a label by
//! hybrid grounding, or go back. [`Session`] holds the logic so it can be
//! tested natively; [`Demo`] is the wasm-bindgen face.

use pocket_core::device::{Device, Gesture, IntentMsg};
use pocket_core::fixtures;
use pocket_core::grounding::{hybrid_ground, TargetSpec, DEFAULT_TAU};
use pocket_core::models::Models;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub struct Session {
    device: Device,
    models: Models,
}

impl Session {
    /// Fixture device with `app/activity` in the foreground.
    pub fn new(app: &str, activity: &str) -> Result<Self, String> {
        let mut device = fixtures::device(7).map_err(|e| e.to_string())?;
        device
            .launch_intent(&IntentMsg::component(app, activity), false)
            .map_err(|e| e.to_string())?;
        let models = Models::stubs(device.screenshot_store());
        Ok(Self { device, models })
    }

    pub fn screen(&self) -> Result<Value, String> {
        let obs = self.device.snapshot().map_err(|e| e.to_string())?;
        serde_json::to_value(obs).map_err(|e| e.to_string())
    }

    fn gesture(&mut self, g: &Gesture) -> Result<Value, String> {
        let r = self.device.apply_gesture(g).map_err(|e| e.to_string())?;
        Ok(json!({
            "changed": r.changed,
            "activity": r.page.map(|p| p.activity),
            "state_digest": self.device.state_digest(),
        }))
    }

    pub fn tap(&mut self, x: i32, y: i32) -> Result<Value, String> {
        self.gesture(&Gesture::Tap { x, y })
    }

    pub fn back(&mut self) -> Result<Value, String> {
        self.gesture(&Gesture::Back)
    }

    /// Ground `query` on the current screen and tap the result.
    pub fn find(&mut self, query: &str) -> Result<Value, String> {
        let obs = self.device.snapshot().map_err(|e| e.to_string())?;
        let g = hybrid_ground(&obs, &TargetSpec::text(query), self.models.grounder.as_ref(), DEFAULT_TAU)
            .map_err(|e| e.to_string())?;
        let mut out = self.gesture(&Gesture::tap(g.point))?;
        out["grounding"] = serde_json::to_value(&g).map_err(|e| e.to_string())?;
        Ok(out)
    }
}

#[wasm_bindgen]
pub struct Demo(Session);

fn js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(app: &str, activity: &str) -> Result<Demo, JsError> {
        Session::new(app, activity).map(Demo).map_err(|e| JsError::new(&e))
    }

    /// Current observation as JSON.
    pub fn screen(&self) -> Result<String, JsError> {
        js(self.0.screen())
    }

    pub fn tap(&mut self, x: i32, y: i32) -> Result<String, JsError> {
        js(self.0.tap(x, y))
    }

    pub fn back(&mut self) -> Result<String, JsError> {
        js(self.0.back())
    }

    pub fn find(&mut self, query: &str) -> Result<String, JsError> {
        js(self.0.find(query))
    }
}
