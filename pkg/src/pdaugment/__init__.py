"""Score-guided syllable-level pitch/duration augmentation of speech.

Turns natural speech into singing-like training audio: syllables are
aligned to notes from MIDI scores, the F0 contour is replaced by note
pitches (with a global register shift when needed), and vowels are
retimed so syllable lengths match the notes. A vocoder with independent
F0/envelope/aperiodicity components does the resynthesis, and a stats
module quantifies the speech-vs-singing acoustic gap.
"""

from .align import AlignmentPair, align_speech_notes
from .audio import Waveform, read_wav, resample, write_wav
from .augment import (
    AugmentConfig,
    AugmentResult,
    PDAugmenter,
    RandomAugmenter,
    UtteranceInput,
    augment_utterance,
    utterance_rng,
)
from .duration import (
    DurationPlan,
    apply_duration,
    compute_duration_plan,
    uniform_vowel_plan,
)
from .errors import (
    AnalysisError,
    ConsistencyError,
    EmptyScoreError,
    FormatError,
    InsufficientNotesError,
    MidiParseError,
    PDAugmentError,
    UnsupportedChannelError,
    UnsyllabifiableError,
    ValidationError,
)
from .midi import (
    NoteEvent,
    NoteSequence,
    TempoMap,
    extract_melody,
    load_melody,
    parse_midi,
    sample_note_window,
)
from .pitch import (
    PitchPlan,
    apply_pitch,
    build_pitch_plan,
    compute_global_shift,
    mean_note_pitch,
    mean_voiced_semitone,
)
from .stats import (
    StatsReport,
    UtteranceStats,
    corpus_report,
    duration_range,
    duration_variance,
    pitch_range,
    pitch_smoothness,
    utterance_stats,
)
from .syllables import Syllable, SyllableSequence, syllabify
from .textgrid import PhonemeInterval, classify, parse_alignment
from .vocoder import (
    F0Contour,
    VocoderParams,
    analyze,
    estimate_f0,
    hz_to_semitone,
    read_params,
    semitone_to_hz,
    synthesize,
    write_params,
)

__version__ = "0.1.0"
