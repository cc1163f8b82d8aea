// React act() support for tests that drive the real DOM without a
// testing-library wrapper.
(globalThis as { IS_REACT_ACT_ENVIRONMENT?: boolean }).IS_REACT_ACT_ENVIRONMENT =
  true;
