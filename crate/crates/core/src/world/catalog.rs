//! Closed vocabulary shared by all worlds: object names, room labels and the
//! two action tokens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROOM_NAMES: [&str; 12] = [
    "kitchen",
    "living_room",
    "bedroom",
    "bathroom",
    "dining_room",
    "office",
    "hallway",
    "laundry_room",
    "garage",
    "closet",
    "porch",
    "family_room",
];

pub const OBJECT_NAMES: [&str; 200] = [
    "chair", "table", "lamp", "sofa", "bed", "pillow",
    "towel", "sink", "toilet", "mirror", "cabinet", "shelf",
    "book", "plant", "picture", "window", "door", "rug",
    "curtain", "stool", "bench", "desk", "monitor", "keyboard",
    "clock", "vase", "bowl", "cup", "mug", "plate",
    "fridge", "oven", "microwave", "stove", "kettle", "toaster",
    "dishwasher", "counter", "bottle", "basket", "box", "trash_can",
    "shower", "bathtub", "faucet", "cushion", "blanket", "dresser",
    "wardrobe", "nightstand", "tv", "remote", "speaker", "fan",
    "heater", "radiator", "vent", "light_switch", "outlet", "painting",
    "frame", "candle", "statue", "sculpture", "tray", "jar",
    "pan", "pot", "knife", "fork", "spoon", "spatula",
    "cutting_board", "blender", "coffee_maker", "rice_cooker", "teapot", "glass",
    "wine_glass", "napkin", "tablecloth", "placemat", "chandelier", "ceiling_light",
    "floor_lamp", "bookshelf", "magazine", "newspaper", "laptop", "printer",
    "phone", "router", "headphones", "guitar", "piano", "drum",
    "violin", "ottoman", "armchair", "recliner", "footrest", "coat_rack",
    "hanger", "umbrella", "shoe", "boot", "slipper", "backpack",
    "suitcase", "handbag", "wallet", "key_bowl", "doormat", "toothbrush",
    "toothpaste", "soap", "shampoo", "hair_dryer", "razor", "comb",
    "scale", "laundry_basket", "washing_machine", "dryer", "iron", "ironing_board",
    "broom", "mop", "bucket", "vacuum", "dustpan", "sponge",
    "detergent", "bleach", "ladder", "toolbox", "hammer", "drill",
    "screwdriver", "wrench", "saw", "bicycle", "skateboard", "ball",
    "racket", "helmet", "treadmill", "dumbbell", "yoga_mat", "exercise_bike",
    "aquarium", "birdcage", "pet_bed", "litter_box", "globe", "map",
    "calendar", "whiteboard", "corkboard", "filing_cabinet", "safe", "trophy",
    "medal", "clock_radio", "alarm_clock", "thermostat", "smoke_detector", "fire_extinguisher",
    "first_aid_kit", "flashlight", "battery", "charger", "extension_cord", "power_strip",
    "lightbulb", "fuse_box", "water_heater", "furnace", "air_conditioner", "humidifier",
    "dehumidifier", "air_purifier", "sewing_machine", "easel", "canvas", "paint_can",
    "brush_set", "crayon_box", "puzzle", "board_game", "chess_set", "dollhouse",
    "teddy_bear", "toy_car", "crib", "high_chair", "stroller", "changing_table",
    "baby_monitor", "rocking_chair",
];

pub const NUM_OBJECTS: usize = OBJECT_NAMES.len();
pub const NUM_ROOMS: usize = ROOM_NAMES.len();
pub const ACTION_STOP: Token = Token((NUM_OBJECTS + NUM_ROOMS) as u16);
pub const ACTION_GO: Token = Token((NUM_OBJECTS + NUM_ROOMS + 1) as u16);
pub const VOCAB_SIZE: usize = NUM_OBJECTS + NUM_ROOMS + 2;

/// Index into the closed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u16);

impl Token {
    pub fn object(index: usize) -> Token {
        debug_assert!(index < NUM_OBJECTS);
        Token(index as u16)
    }

    pub fn room(index: usize) -> Token {
        debug_assert!(index < NUM_ROOMS);
        Token((NUM_OBJECTS + index) as u16)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_object(self) -> bool {
        self.index() < NUM_OBJECTS
    }

    pub fn is_room(self) -> bool {
        (NUM_OBJECTS..NUM_OBJECTS + NUM_ROOMS).contains(&self.index())
    }

    pub fn is_action(self) -> bool {
        self == ACTION_STOP || self == ACTION_GO
    }

    pub fn as_str(self) -> &'static str {
        let i = self.index();
        if i < NUM_OBJECTS {
            OBJECT_NAMES[i]
        } else if i < NUM_OBJECTS + NUM_ROOMS {
            ROOM_NAMES[i - NUM_OBJECTS]
        } else if self == ACTION_STOP {
            "ActionStop"
        } else if self == ACTION_GO {
            "ActionGo"
        } else {
            "<unknown>"
        }
    }

    pub fn parse(name: &str) -> Result<Token> {
        if let Some(i) = OBJECT_NAMES.iter().position(|n| *n == name) {
            return Ok(Token::object(i));
        }
        if let Some(i) = ROOM_NAMES.iter().position(|n| *n == name) {
            return Ok(Token::room(i));
        }
        match name {
            "ActionStop" => Ok(ACTION_STOP),
            "ActionGo" => Ok(ACTION_GO),
            _ => Err(Error::UnknownToken(name.to_string())),
        }
    }

    /// Fails for ids outside the vocabulary.
    pub fn check(self) -> Result<Token> {
        if self.index() < VOCAB_SIZE {
            Ok(self)
        } else {
            Err(Error::UnknownToken(format!("#{}", self.0)))
        }
    }
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_round_trip() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..VOCAB_SIZE {
            let t = Token(i as u16);
            assert!(seen.insert(t.as_str()), "duplicate {}", t);
            assert_eq!(Token::parse(t.as_str()).unwrap(), t);
        }
        assert!(Token::parse("spaceship").is_err());
        assert!(Token(VOCAB_SIZE as u16).check().is_err());
    }
}
