use wasm_bindgen::prelude::*;

use crate::demo::Demo;

fn js(e: layoutsim::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[wasm_bindgen(js_name = Demo)]
pub struct WasmDemo(Demo);

#[wasm_bindgen(js_class = Demo)]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str) -> Result<WasmDemo, JsError> {
        Demo::new(name).map(WasmDemo).map_err(js)
    }

    /// JSON array of the bundled scene names.
    #[wasm_bindgen(js_name = sceneNames)]
    pub fn scene_names() -> String {
        to_json(&layoutsim::scenes::ACCEPTANCE_SCENES)
    }

    /// JSON array of `{id, parent, vertices, edges}`.
    pub fn objects(&self) -> Result<String, JsError> {
        self.0.objects().map(|o| to_json(&o)).map_err(js)
    }

    #[wasm_bindgen(js_name = frameCount)]
    pub fn frame_count(&self) -> usize {
        self.0.frame_count()
    }

    pub fn frame(&self, k: usize) -> Vec<f64> {
        self.0.frame(k)
    }

    pub fn settle(&mut self) -> Result<String, JsError> {
        self.0.settle().map(|s| to_json(&s)).map_err(js)
    }

    pub fn delete(&mut self, id: &str) -> Result<String, JsError> {
        self.0.delete(id).map(|s| to_json(&s)).map_err(js)
    }

    #[wasm_bindgen(js_name = addBox)]
    #[allow(clippy::too_many_arguments)]
    pub fn add_box(
        &mut self,
        id: &str,
        parent: &str,
        hx: f64,
        hy: f64,
        hz: f64,
        x: f64,
        z: f64,
    ) -> Result<String, JsError> {
        self.0
            .add_box(id, parent, [hx, hy, hz], [x, 0.0, z])
            .map(|s| to_json(&s))
            .map_err(js)
    }

    pub fn optimize(&mut self, epochs: usize) -> Result<String, JsError> {
        self.0.optimize(epochs).map(|s| to_json(&s)).map_err(js)
    }
}
