pub const TOPICS: &[(&str, &[&str])] = &[
    ("harbour", &[
        "harbour", "ferry", "dock", "quay", "trawler", "fishermen", "tide", "lighthouse", "pier", "crane",
        "cargo", "vessel", "anchor", "gull", "breakwater", "mooring", "skipper", "netting", "salt", "coastguard",
        "jetty", "hull", "buoy", "estuary", "seawall", "shipyard", "rigging", "catch", "wharf", "marina",
        "dredger", "barge", "oyster", "sailcloth", "harbourmaster", "slipway",
    ]),
    ("election", &[
        "ballot", "candidate", "polling", "turnout", "mayor", "council", "campaign", "voters", "referendum", "constituency",
        "manifesto", "debate", "incumbent", "coalition", "precinct", "recount", "senator", "party", "rally", "pollster",
        "canvassing", "runoff", "delegates", "primary", "electorate", "franchise", "hustings", "chamber", "minister", "opposition",
        "majority", "seat", "nominee", "legislature", "caucus", "ballotbox",
    ]),
    ("football", &[
        "striker", "goalkeeper", "penalty", "stadium", "midfielder", "referee", "league", "derby", "corner", "offside",
        "captain", "defender", "trophy", "supporters", "halftime", "equaliser", "tackle", "winger", "manager", "fixture",
        "substitute", "crossbar", "dugout", "scoreline", "relegation", "transfer", "kickoff", "header", "touchline", "freekick",
        "champions", "semifinal", "terraces", "dribble", "volley", "clubhouse",
    ]),
    ("museum", &[
        "museum", "exhibition", "curator", "gallery", "sculpture", "painting", "canvas", "artefact", "collection", "restoration",
        "portrait", "fresco", "archive", "pottery", "mosaic", "pedestal", "vitrine", "antiquity", "manuscript", "tapestry",
        "bronze", "relic", "etching", "installation", "atrium", "catalogue", "donor", "masterpiece", "frame", "sketch",
        "lithograph", "marble", "conservator", "pigment", "easel", "showcase",
    ]),
    ("railway", &[
        "railway", "locomotive", "platform", "signal", "timetable", "carriage", "commuters", "junction", "track", "viaduct",
        "conductor", "freight", "tunnel", "sleeper", "station", "ticket", "shunting", "gauge", "overhead", "depot",
        "turnstile", "engineer", "branchline", "siding", "coupling", "footbridge", "railcar", "terminus", "interchange", "level",
        "crossing", "points", "signalbox", "wagon", "driver", "concourse",
    ]),
    ("farming", &[
        "harvest", "tractor", "barley", "orchard", "livestock", "drought", "irrigation", "farmer", "silo", "pasture",
        "wheat", "combine", "fertiliser", "hedgerow", "barn", "cattle", "shearing", "vineyard", "seedling", "furrow",
        "meadow", "dairy", "plough", "granary", "flock", "grazing", "crop", "tillage", "compost", "polytunnel",
        "haystack", "milking", "acreage", "smallholding", "beehive", "sowing",
    ]),
    ("wildfire", &[
        "wildfire", "firefighters", "blaze", "smoke", "evacuation", "embers", "scrubland", "helicopter", "firebreak", "containment",
        "ash", "hillside", "flames", "waterbomber", "arson", "charred", "heatwave", "brush", "spotfire", "canyon",
        "hotspot", "backburn", "retardant", "ridge", "volunteers", "siren", "shelter", "plume", "torched", "perimeter",
        "firestorm", "bushland", "scorched", "smouldering", "lookout", "tanker",
    ]),
    ("space", &[
        "rocket", "launchpad", "orbit", "astronaut", "satellite", "telescope", "capsule", "booster", "lunar", "countdown",
        "payload", "spacecraft", "module", "docking", "thruster", "gravity", "crater", "probe", "mission", "cosmonaut",
        "spacewalk", "comet", "nebula", "observatory", "rover", "heatshield", "trajectory", "splashdown", "liftoff", "asteroid",
        "antenna", "galaxy", "propellant", "astronomer", "eclipse", "meteor",
    ]),
    ("cuisine", &[
        "chef", "kitchen", "recipe", "bakery", "pastry", "market", "spices", "restaurant", "menu", "sourdough",
        "saucepan", "tasting", "vineyard", "cheesemonger", "broth", "dumplings", "flour", "oven", "fishmonger", "brasserie",
        "apron", "skillet", "herbs", "simmering", "croissant", "noodles", "butcher", "garnish", "dessert", "truffle",
        "marinade", "bistro", "patisserie", "ladle", "fermentation", "caterer",
    ]),
    ("flood", &[
        "flood", "river", "sandbags", "rainfall", "levee", "torrent", "inundation", "rescuers", "dinghy", "submerged",
        "downpour", "embankment", "floodplain", "overflow", "culvert", "drainage", "reservoir", "spillway", "storm", "waterlogged",
        "riverbank", "swollen", "deluge", "evacuees", "pumps", "mudslide", "gauge", "surge", "lifeboat", "stranded",
        "washout", "basement", "dam", "tributary", "monsoon", "silt",
    ]),
    ("tennis", &[
        "tennis", "racket", "baseline", "serve", "volley", "tiebreak", "umpire", "grasscourt", "backhand", "forehand",
        "deuce", "seed", "doubles", "netcord", "ballboy", "clay", "ace", "lob", "smash", "rally",
        "quarterfinal", "wildcard", "sweatband", "stringing", "grandslam", "hawkeye", "groundstroke", "slice", "topspin", "dropshot",
        "centrecourt", "trophy", "qualifier", "match", "ranking", "coach",
    ]),
    ("hospital", &[
        "hospital", "nurse", "surgeon", "ward", "ambulance", "clinic", "patients", "vaccine", "stethoscope", "theatre",
        "paramedic", "triage", "pharmacy", "midwife", "radiology", "bedside", "consultant", "outpatient", "infirmary", "scalpel",
        "anaesthetist", "prescription", "stretcher", "maternity", "oncology", "diagnosis", "physician", "gurney", "defibrillator", "intensive",
        "waiting", "bandage", "syringe", "pathology", "orderly", "recovery",
    ]),
];

pub const FILLER: &[&str] = &[
    "the", "a", "of", "in", "on", "and", "with", "at", "by", "for", "as", "from", "near", "after", "during", "over",
];

pub const VERBS: &[&str] = &[
    "gathers", "waits", "returns", "stands", "moves", "opens", "closes", "rises", "falls", "shows", "turns", "holds",
];

/// Words that mark captions and their matching paragraph; each site uses a few.
pub const REGISTERS: &[&str] = &[
    "pictured", "depicted", "snapshot", "glimpse", "portrayed", "framed", "captured", "spotted", "photographed", "shown",
    "illustrated", "visible", "lensed", "imaged", "viewed", "filmed", "seen", "snapped", "recorded", "observed",
    "featured", "highlighted", "showcased", "displayed", "exhibited", "presented", "portrait", "closeup", "aerial", "panorama",
];

pub const SITE_PREFIXES: &[&str] = &[
    "morning", "evening", "daily", "weekly", "northern", "southern", "coastal", "metro", "valley", "capital", "harbour",
    "river", "city", "county", "national", "global",
];

pub const SITE_SUFFIXES: &[&str] = &[
    "ledger", "herald", "courier", "gazette", "chronicle", "observer", "dispatch", "tribune", "record", "sentinel",
    "bulletin", "mercury", "examiner", "post", "standard", "journal",
];

pub const TLDS: &[&str] = &["com", "net", "org", "co.uk", "news", "info"];

pub const BOILERPLATE: &[&str] = &[
    "advertisement", "share this article", "most read today", "sign up for our newsletter", "related stories",
    "follow us for updates", "comments are closed", "read more from this section", "subscribe for full access",
    "listen to this article", "print edition", "sponsored content", "trending now", "recommended for you",
    "report a correction", "contact the newsroom",
];

pub const FIRST_NAMES: &[&str] = &[
    "amira", "bruno", "chloe", "dmitri", "elena", "farid", "greta", "hugo", "ines", "jonas", "keiko", "luca",
];

pub const LAST_NAMES: &[&str] = &[
    "moreau", "okafor", "lindqvist", "tanaka", "silva", "kowalski", "haddad", "novak", "ferreira", "brennan",
];

pub const AGENCIES: &[&str] = &["wirefoto", "pressline", "newsimage", "lensbureau", "fotodesk", "camerapool"];
