use crate::data::{Dialogue, DialogueTurn, EmotionLabel};
use crate::error::Result;

use EmotionLabel::*;

/// Ten short dialogues whose wording carries the emotion: every turn
/// contains a keyword tied to its label.
const SCRIPT: [&[(EmotionLabel, &str)]; 10] = [
    &[
        (Neutral, "Hi, how was your day?"),
        (Happiness, "Wonderful! I got the job I wanted."),
        (Surprise, "Wow, really? That was fast!"),
        (Happiness, "Yes, I am so happy about it."),
    ],
    &[
        (Neutral, "Did you see the kitchen?"),
        (Disgust, "Gross, the sink is full of old food."),
        (Anger, "I am furious that nobody cleaned it."),
        (Sadness, "Sorry, I feel miserable for forgetting."),
    ],
    &[
        (Fear, "I heard a noise downstairs, I am scared."),
        (Neutral, "Okay, let us check the door together."),
        (Surprise, "Wow, it was just the cat!"),
        (Happiness, "Great, what a relief."),
    ],
    &[
        (Sadness, "My dog is sick and I feel miserable."),
        (Neutral, "Okay, have you called the vet?"),
        (Fear, "Yes, but I am scared of what they will say."),
        (NonNeutral, "Hmm, well, maybe it is nothing serious."),
    ],
    &[
        (Anger, "You broke my phone, I am furious!"),
        (Sadness, "I am sorry, I feel terrible about it."),
        (Neutral, "Okay, just pay for the repair."),
        (Happiness, "Deal, thank you for being kind."),
    ],
    &[
        (Surprise, "Wow, is that a new car?"),
        (Happiness, "Yes! I love it so much."),
        (Disgust, "Gross, it still smells like the old owner."),
        (NonNeutral, "Hmm, I suppose it does a little."),
    ],
    &[
        (Neutral, "The meeting moved to noon."),
        (Anger, "That is ridiculous, I am furious about these changes."),
        (Neutral, "Okay, I will tell the team."),
        (Sadness, "Fine, I am too tired to argue."),
    ],
    &[
        (Happiness, "We won the match today!"),
        (Surprise, "Wow, against the champions?"),
        (Happiness, "Yes, it was wonderful."),
        (Fear, "I am scared of the final though."),
    ],
    &[
        (Disgust, "This soup tastes gross."),
        (NonNeutral, "Hmm, it is not that bad."),
        (Anger, "It is awful and I am furious I paid for it."),
        (Neutral, "Okay, let us order something else."),
    ],
    &[
        (Fear, "The exam is tomorrow and I am scared."),
        (Neutral, "Okay, let us review the notes."),
        (Sadness, "I am miserable, I studied the wrong chapter."),
        (Surprise, "Wow, then we have a lot of work tonight!"),
    ],
];

/// The shipped ten-dialogue corpus.
pub fn synthetic_dialogues() -> Result<Vec<Dialogue>> {
    SCRIPT
        .iter()
        .enumerate()
        .map(|(i, turns)| {
            let turns = turns
                .iter()
                .enumerate()
                .map(|(k, (e, text))| DialogueTurn::new(if k % 2 == 0 { "A" } else { "B" }, text, *e))
                .collect::<Result<Vec<_>>>()?;
            Ok(Dialogue {
                dialogue_id: format!("synth-{i:02}"),
                turns,
            })
        })
        .collect()
}
