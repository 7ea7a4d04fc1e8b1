//! The built-in reference catalog: 17 intents over 10 domains, four seeded
//! confusions. Every non-triggering template of a confused intent shares at
//! least half of its tokens with the triggering template, so rephrases are
//! recoverable by token overlap.

use std::collections::BTreeMap;

use super::{ConfusionRule, IntentRef, IntentSpec};

fn intent(domain: &str, name: &str, slots: &[&str], templates: &[&str]) -> IntentSpec {
    IntentSpec {
        domain: domain.into(),
        intent: name.into(),
        slots: slots.iter().map(|s| s.to_string()).collect(),
        templates: templates.iter().map(|s| s.to_string()).collect(),
        weight: 1.0,
    }
}

pub fn reference_intents() -> Vec<IntentSpec> {
    vec![
        intent("Music", "PlaySong", &["Song"], &["play {Song}", "play the song {Song}", "play the track {Song}"]),
        intent("Music", "PlayArtist", &["Artist"], &["play music by {Artist}", "play some {Artist} music"]),
        intent("Music", "AddToPlaylist", &["Song"], &["add {Song} to my playlist", "put {Song} on my playlist"]),
        intent("Video", "PlayMovie", &["Movie"], &["play the movie {Movie}", "start the movie {Movie}"]),
        intent("Video", "PlayShow", &["Show"], &["play the show {Show}", "watch the next episode of {Show}"]),
        intent(
            "Weather",
            "GetForecast",
            &["City"],
            &["what is the weather like in {City}", "what is it like in {City}", "what is the weather like in {City} today"],
        ),
        intent("Weather", "GetTemperature", &["City"], &["how hot is it in {City}", "what is the temperature in {City}"]),
        intent("Travel", "GetInfo", &["City"], &["tell me about visiting {City}", "travel guide for {City}"]),
        intent(
            "Shopping",
            "AddToList",
            &["Item"],
            &["add {Item} to my list", "add {Item} to my shopping list", "please add {Item} to my shopping list"],
        ),
        intent("Shopping", "Reorder", &["Item"], &["reorder {Item}", "order more {Item}"]),
        intent(
            "Restaurant",
            "FindRestaurant",
            &["Cuisine"],
            &[
                "how do i find a good {Cuisine} restaurant around here",
                "find a good {Cuisine} restaurant around here",
                "find me a good {Cuisine} restaurant around here",
            ],
        ),
        intent("Knowledge", "AskQuestion", &["Topic"], &["what is {Topic}", "tell me about {Topic}"]),
        intent("Timer", "SetTimer", &["Duration"], &["set a timer for {Duration}", "start a {Duration} timer"]),
        intent("Timer", "SetAlarm", &["Time"], &["set an alarm for {Time}", "wake me up at {Time}"]),
        intent("SmartHome", "TurnOn", &["Device"], &["turn on the {Device}", "switch on the {Device}"]),
        intent("SmartHome", "TurnOff", &["Device"], &["turn off the {Device}", "switch off the {Device}"]),
        intent("General", "Greet", &[], &["hello there", "hi there assistant"]),
    ]
}

fn rule(trigger: &str, wrong: (&str, &str), correct: (&str, &str), rate: f64) -> ConfusionRule {
    ConfusionRule {
        trigger: trigger.into(),
        wrong: IntentRef { domain: wrong.0.into(), intent: wrong.1.into() },
        correct: IntentRef { domain: correct.0.into(), intent: correct.1.into() },
        rate,
    }
}

pub fn reference_rules() -> Vec<ConfusionRule> {
    vec![
        rule("Music.PlaySong:play {Song}", ("Video", "PlayMovie"), ("Music", "PlaySong"), 0.7),
        rule("Weather.GetForecast:what is it like in {City}", ("Travel", "GetInfo"), ("Weather", "GetForecast"), 0.65),
        rule("Shopping.AddToList:add {Item} to my list", ("Music", "AddToPlaylist"), ("Shopping", "AddToList"), 0.75),
        rule(
            "Restaurant.FindRestaurant:how do i find a good {Cuisine} restaurant around here",
            ("Knowledge", "AskQuestion"),
            ("Restaurant", "FindRestaurant"),
            0.7,
        ),
    ]
}

fn pool(values: &[&str]) -> Vec<String> {
    values.iter().map(|s| s.to_string()).collect()
}

pub fn reference_slot_values() -> BTreeMap<String, Vec<String>> {
    let mut m = BTreeMap::new();
    m.insert(
        "Song".into(),
        pool(&[
            "thriller", "old town road", "shake it off", "bad guy", "yesterday", "blinding lights", "frozen", "happy",
            "believer", "let it go", "perfect", "hey jude",
        ]),
    );
    m.insert(
        "Artist".into(),
        pool(&["taylor swift", "adele", "drake", "the beatles", "coldplay", "beyonce", "ed sheeran", "queen", "rihanna"]),
    );
    m.insert(
        "Movie".into(),
        pool(&["frozen", "inception", "the matrix", "titanic", "up", "cars", "avatar", "jaws", "the lion king", "toy story"]),
    );
    m.insert(
        "Show".into(),
        pool(&["friends", "the office", "breaking bad", "seinfeld", "the crown", "lost", "dark", "succession"]),
    );
    m.insert(
        "City".into(),
        pool(&["seattle", "new york", "london", "paris", "tokyo", "boston", "chicago", "berlin", "san francisco", "austin"]),
    );
    m.insert(
        "Item".into(),
        pool(&["milk", "paper towels", "eggs", "coffee", "almond milk", "batteries", "dish soap", "bread", "bananas", "rice"]),
    );
    m.insert(
        "Cuisine".into(),
        pool(&["italian", "thai", "mexican", "indian", "sushi", "chinese", "greek", "korean", "vegan", "french"]),
    );
    m.insert(
        "Topic".into(),
        pool(&["black holes", "photosynthesis", "the moon", "gravity", "dinosaurs", "volcanoes", "the roman empire", "dna"]),
    );
    m.insert(
        "Duration".into(),
        pool(&["five minutes", "ten minutes", "one hour", "thirty seconds", "twenty minutes", "two hours"]),
    );
    m.insert("Time".into(), pool(&["seven am", "six thirty", "noon", "eight pm", "nine am", "midnight"]));
    m.insert(
        "Device".into(),
        pool(&["lights", "kitchen lights", "fan", "tv", "heater", "porch light", "bedroom lamp"]),
    );
    m
}
