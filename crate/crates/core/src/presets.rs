//! Reference injection layers and strengths for four 7B-8B vision-language
//! families, per benchmark task. These are starting points for tuning, not
//! universal defaults.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VlmFamily {
    LlavaNextLlama3,
    InternVl2,
    Qwen2Vl,
    Idefics2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Task {
    MathVistaAll,
    MathVistaGeneral,
    MathVistaMath,
    MathVerseOverall,
    MathVerseTextDominant,
    MathVerseTextLite,
    MathVerseVisionIntensive,
    MathVerseVisionDominant,
    MathVerseVisionOnly,
    MmStarAll,
    MmStarPerception,
    MmStarReasoning,
    DynaMath,
    MathVision,
}

impl Task {
    pub const ALL: [Task; 14] = [
        Task::MathVistaAll,
        Task::MathVistaGeneral,
        Task::MathVistaMath,
        Task::MathVerseOverall,
        Task::MathVerseTextDominant,
        Task::MathVerseTextLite,
        Task::MathVerseVisionIntensive,
        Task::MathVerseVisionDominant,
        Task::MathVerseVisionOnly,
        Task::MmStarAll,
        Task::MmStarPerception,
        Task::MmStarReasoning,
        Task::DynaMath,
        Task::MathVision,
    ];

    fn column(self) -> usize {
        Task::ALL.iter().position(|&t| t == self).expect("listed")
    }
}

const LAYERS: [[u32; 14]; 4] = [
    [12, 12, 12, 17, 16, 13, 14, 18, 19, 15, 15, 15, 17, 16],
    [19, 19, 19, 16, 17, 14, 19, 13, 20, 17, 17, 17, 18, 15],
    [9, 9, 9, 16, 17, 12, 13, 14, 16, 12, 12, 12, 15, 14],
    [15, 15, 15, 20, 19, 16, 14, 21, 12, 13, 13, 13, 16, 17],
];

const STRENGTHS: [[f64; 14]; 4] = [
    [0.3, 0.3, 0.3, 0.6, 0.5, 0.4, 0.6, 0.5, 0.6, 0.3, 0.3, 0.3, 0.5, 0.4],
    [0.4, 0.4, 0.3, 0.7, 0.6, 0.3, 0.7, 0.4, 0.6, 0.6, 0.6, 0.6, 0.5, 0.6],
    [0.3, 0.3, 0.3, 0.5, 0.5, 0.3, 0.4, 0.5, 0.6, 0.5, 0.5, 0.5, 0.4, 0.4],
    [0.5, 0.5, 0.5, 0.8, 0.6, 0.5, 0.4, 0.7, 0.3, 0.6, 0.6, 0.6, 0.5, 0.5],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectionPreset {
    pub layer_target: u32,
    pub alpha: f64,
}

pub fn injection_preset(family: VlmFamily, task: Task) -> InjectionPreset {
    let row = family as usize;
    let col = task.column();
    InjectionPreset {
        layer_target: LAYERS[row][col],
        alpha: STRENGTHS[row][col],
    }
}
