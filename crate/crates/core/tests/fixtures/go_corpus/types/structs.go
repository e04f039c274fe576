package types

type Handler struct {
	fn   func() error
	opts struct {
		Retries int
	}
}

type Callback func(int) error

func (h *Handler) Run() error {
	if h.fn != nil {
		return h.fn()
	}
	return nil
}

func (c Callback) Call(v int) error { return c(v) }

type (
	A struct{ x int }
	B struct {
		y int
	}
)

func (a A) X() int { return a.x }
