use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fault {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
    /// Not previously reported for vision models.
    pub novel: bool,
}

const fn fault(id: &'static str, name: &'static str, description: &'static str, novel: bool) -> Fault {
    Fault {
        id,
        name,
        description,
        novel,
    }
}

/// The fixed fault taxonomy used for labeling. Ids are slugs of the names.
pub static FAULTS: [Fault; 14] = [
    fault(
        "action-vs-stillness-confusion",
        "Action vs. Stillness confusion",
        "Moving subjects read as posing, or posed subjects read as in motion.",
        true,
    ),
    fault(
        "failure-to-identify-the-direction-of-movement-or-positioning-of-objects-in-the-image",
        "Failure to identify the direction of movement or positioning of objects in the image",
        "Left/right, heading, or spatial layout of objects is wrong.",
        true,
    ),
    fault(
        "hallucination-of-water-like-features",
        "Hallucination of Water-like Features",
        "Captions mention water, beaches, or waves that the image does not contain.",
        true,
    ),
    fault(
        "misattribution-of-geographic-context",
        "Misattribution of Geographic Context",
        "A specific place or region is inferred from props or scenery.",
        true,
    ),
    fault(
        "misinterpretation-of-color",
        "Misinterpretation of color",
        "Colors are assigned to the wrong object or misread.",
        false,
    ),
    fault(
        "confusion-between-objects",
        "Confusion between objects",
        "One object is taken for a visually similar one.",
        false,
    ),
    fault(
        "inability-to-capture-facial-expressions",
        "Inability to capture facial expressions",
        "Expressions and emotions are missed or misread.",
        false,
    ),
    fault(
        "lack-of-attention-to-details",
        "Lack of attention to details",
        "Small but salient elements (text, held objects, animals) are dropped.",
        false,
    ),
    fault(
        "different-activities-and-positions-of-people-not-being-encoded-properly",
        "Different activities and positions of people not being encoded properly",
        "What people are doing, or their posture, is wrong.",
        false,
    ),
    fault(
        "failure-to-account-for-the-size-and-number-of-objects-persons-animals-present-in-the-image",
        "Failure to account for the size and number of objects/persons/animals present in the image",
        "Counts or relative sizes are wrong.",
        false,
    ),
    fault(
        "failure-to-capture-the-difference-in-gender-roles-and-activities",
        "Failure to capture the difference in gender roles and activities",
        "Gender of subjects, or activity associated with it, is wrong.",
        false,
    ),
    fault(
        "cultural-misrepresentation",
        "Cultural Misrepresentation",
        "Cultural symbols or settings are misread.",
        false,
    ),
    fault(
        "disregarding-object-interactions",
        "Disregarding object interactions",
        "Objects are present but who-holds-what or what-touches-what is wrong.",
        false,
    ),
    fault(
        "different-types-of-transportation-animal-confusion",
        "Different types of transportation/animal confusion",
        "One vehicle or animal type is taken for another.",
        false,
    ),
];

pub fn taxonomy() -> &'static [Fault] {
    &FAULTS
}

pub fn find_fault(id: &str) -> Option<&'static Fault> {
    FAULTS.iter().find(|f| f.id == id)
}

/// Lowercase, with every run of non-alphanumerics collapsed to one `-`.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}
