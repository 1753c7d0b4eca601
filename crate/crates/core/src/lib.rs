//! Edge-side mobile agent runtime coupled to a deterministic simulated
//! Android device.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`device`] – the simulated handset: apps, activities, intents and
//!   deeplinks, task stacks, UI trees with a separate render layer, media
//!   store, playback track and a virtual-clock alarm scheduler.
//! * [`ingress`] – one request envelope stream for every trigger source.
//! * [`perception`] – frame ring, transcript-level echo cancellation,
//!   speech/frame alignment and scene-grounded intent decomposition.
//! * [`memory`] – working memory, gallery memory, redaction, retrieval,
//!   staging and context injection.
//! * [`grounding`] – XML → OCR → visual target resolution.
//! * [`agent`] – the observe/reason/execute loop, scroll–extract and
//!   ordinal follow-ups.
//! * [`replay`] – behaviour recording, dump introspection, skill cards,
//!   bookmarks and the tiered replay ladder.
//! * [`runtime`] – glue that runs an envelope through all of the above.
//! * [`fixtures`] – bundled sample apps and gallery.
//!
//! Every model dependency sits behind a trait in [`models`]; the default
//! implementations are deterministic stubs that read fixture truth.

pub mod agent;
pub mod device;
pub mod fixtures;
pub mod geometry;
pub mod grounding;
pub mod ingress;
pub mod memory;
pub mod models;
pub mod perception;
pub mod replay;
pub mod runtime;
pub mod text;

pub use geometry::{Point, Rect, SCREEN};
